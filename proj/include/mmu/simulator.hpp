#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmu/core.hpp"
#include "mmu/metrics.hpp"

namespace mmu {

/// Parameters of the latent-knowledge generative model. An instance becomes
/// known in each training language with probability memorization_training;
/// anything known in at least one training language surfaces in each
/// hold-out language with probability spread_rate (plus an optional direct
/// hold-out memorization channel, off by default). Unlearning then erases
/// known forget-set cells per language, and observations are emitted with
/// SE noise and Beta-distributed probabilities.
struct ScenarioConfig {
    std::size_t n_forget = 0;
    std::size_t n_retain = 0;
    std::vector<LanguageId> languages;
    double memorization_training = 0.9;
    double memorization_holdout = 0.0;
    double spread_rate = 0.5;
    std::map<std::string, double> unlearn_effect; // per-language erase probability
    double noise = 0.0;                           // SE bit flip probability
    double prob_known_alpha = 9.0;                // Beta params for emitted prob
    double prob_known_beta = 1.0;
    double prob_unknown_alpha = 1.0;
    double prob_unknown_beta = 9.0;
    std::uint64_t seed = 0;

    /// Sets every language's unlearn effect to the same value.
    void set_uniform_unlearn(double effect);
    /// Sets the effect for training languages only, zero elsewhere.
    void set_training_only_unlearn(double effect);

    void validate() const;
};

ScenarioConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioConfig& config);
ScenarioConfig load_scenario_file(const std::string& path);

/// Latent knowledge bits per cell, before and after simulated unlearning.
struct GroundTruth {
    std::map<CellKey, std::pair<bool, bool>> cells; // (known_before, known_after)

    void save_jsonl(std::ostream& out) const;
};

struct Simulation {
    EvalMatrix matrix;
    GroundTruth truth;
};

/// Deterministic for a given seed.
Simulation simulate(const ScenarioConfig& config);

/// Metric suite computed on one simulated matrix: KSS over the hold-out
/// subset (case1), the training subset (case2), and all languages, plus the
/// per-case KPS averaged over training base languages.
struct MetricBundle {
    struct KssEntry {
        ScoreMode mode;
        std::string case_label;
        double roc = 0.0;
        double pr = 0.0;
    };
    std::vector<KssEntry> kss;
    std::optional<double> kps_case1_avg;
    std::optional<double> kps_case2_avg;

    const KssEntry& entry(ScoreMode mode, const std::string& case_label) const;
};

MetricBundle metric_bundle(const EvalMatrix& matrix);

struct SweepRow {
    double value;
    std::uint64_t seed;
    MetricBundle metrics;
};

/// Re-simulates with `param` swept over `values`; each run draws from a
/// derived seed (base seed XOR value index). Supported params:
/// unlearn_effect, spread_rate, noise, memorization_training,
/// memorization_holdout.
std::vector<SweepRow> sweep(const ScenarioConfig& base, const std::string& param,
                            const std::vector<double>& values);

nlohmann::json sweep_to_json(const std::vector<SweepRow>& rows, const std::string& param);

} // namespace mmu
