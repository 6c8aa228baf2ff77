#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mmu {

/// Seeded sampling helpers on top of mt19937_64. The standard fixes the
/// engine output exactly but not the distribution adaptors, so everything
/// downstream of the engine is spelled out here to keep seeded runs
/// reproducible across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // rejection sampling keeps the draw unbiased
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    /// Gamma(shape, 1). Integral shapes use the exact -log(prod u) form;
    /// non-integral shapes fall back to Marsaglia-Tsang.
    double gamma(double shape) {
        if (shape <= 0.0) return 0.0;
        const double floor_shape = std::floor(shape);
        if (floor_shape == shape && shape <= 64.0) {
            double log_prod = 0.0;
            for (int i = 0; i < static_cast<int>(shape); ++i) {
                double u;
                do {
                    u = uniform();
                } while (u == 0.0);
                log_prod += std::log(u);
            }
            return -log_prod;
        }
        return gamma_marsaglia(shape);
    }

    /// Beta(alpha, beta) via the two-gamma construction.
    double beta(double alpha, double beta_param) {
        const double x = gamma(alpha);
        const double y = gamma(beta_param);
        const double total = x + y;
        return total == 0.0 ? 0.5 : x / total;
    }

private:
    double standard_normal() {
        // Box-Muller, one value per call
        double u1;
        do {
            u1 = uniform();
        } while (u1 == 0.0);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double gamma_marsaglia(double shape) {
        if (shape < 1.0) {
            const double u = uniform();
            return gamma_marsaglia(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            const double x = standard_normal();
            const double v_base = 1.0 + c * x;
            if (v_base <= 0.0) continue;
            const double v = v_base * v_base * v_base;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    std::mt19937_64 engine_;
};

} // namespace mmu
