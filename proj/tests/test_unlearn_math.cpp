#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "mmu/unlearn_math.hpp"
#include "test_support.hpp"

using namespace mmu;

namespace {

SequenceLogProb seq(std::vector<double> current,
                    std::optional<std::vector<double>> reference = std::nullopt) {
    return SequenceLogProb{std::move(current), std::move(reference)};
}

std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n) {
    std::vector<double> v(n);
    double sum = 0.0;
    for (auto& x : v) {
        x = 1e-3 + static_cast<double>(rng() % 1000);
        sum += x;
    }
    for (auto& x : v) x /= sum;
    return v;
}

} // namespace

TEST_CASE("ga_loss is the mean summed sequence log likelihood") {
    CHECK(ga_loss({seq({0.0, 0.0, 0.0})}) == 0.0);
    CHECK(ga_loss({seq({std::log(0.5)})}) == doctest::Approx(-0.6931471805599453).epsilon(1e-15));
    CHECK(ga_loss({seq({-1.0}), seq({-1.0, -2.0})}) == -2.0);
    CHECK_VALIDATION_KIND(ga_loss({}), ErrorKind::EmptyBatch);
    CHECK_VALIDATION_KIND(ga_loss({seq({0.5})}), ErrorKind::PositiveLogProb);

    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<SequenceLogProb> batch;
        for (int s = 0; s < 1 + static_cast<int>(rng() % 5); ++s) {
            std::vector<double> logps(1 + rng() % 6);
            for (auto& lp : logps) lp = -static_cast<double>(rng() % 100) / 10.0;
            batch.push_back(seq(logps));
        }
        CHECK(ga_loss(batch) <= 0.0);
    }
}

TEST_CASE("gagdr_loss subtracts the retain term") {
    CHECK(gagdr_loss({seq({-2.0})}, {seq({-2.0})}) == 0.0);
    CHECK(gagdr_loss({seq({-1.0})}, {seq({-3.0})}) == 2.0);
    CHECK(gagdr_loss({seq({0.0})}, {seq({0.0, 0.0})}) == 0.0);
    CHECK_VALIDATION_KIND(gagdr_loss({}, {seq({-1.0})}), ErrorKind::EmptyBatch);
    CHECK_VALIDATION_KIND(gagdr_loss({seq({-1.0})}, {}), ErrorKind::EmptyBatch);

    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<SequenceLogProb> batch;
        for (int s = 0; s < 1 + static_cast<int>(rng() % 4); ++s) {
            batch.push_back(seq({-static_cast<double>(rng() % 30) / 10.0}));
        }
        CHECK(gagdr_loss(batch, batch) == 0.0);
    }
}

TEST_CASE("kl_divergence validates and computes the retain term") {
    CHECK(kl_divergence({{0.3, 0.7}, {0.3, 0.7}}) == 0.0);
    // 0.5*log 2 + 0.5*log(2/3)
    CHECK(kl_divergence({{0.5, 0.5}, {0.25, 0.75}}) ==
          doctest::Approx(0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0)).epsilon(1e-15));
    CHECK_VALIDATION_KIND(kl_divergence({{0.5, 0.6}, {0.5, 0.5}}),
                          ErrorKind::UnnormalizedDistribution);
    CHECK_VALIDATION_KIND(kl_divergence({{0.5, 0.5}, {0.5, 0.5, 0.0}}),
                          ErrorKind::SupportMismatch);
    CHECK_VALIDATION_KIND(kl_divergence({{0.5, 0.5}, {1.0, 0.0}}), ErrorKind::SupportMismatch);
    // zero current mass is fine
    CHECK(kl_divergence({{0.0, 1.0}, {0.5, 0.5}}) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("KL term is nonnegative and zero only at equality") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        const auto p = random_simplex(rng, 2 + rng() % 6);
        CHECK(kl_divergence({p, p}) == 0.0);

        auto q = random_simplex(rng, p.size());
        const double kl = kl_divergence({p, q});
        CHECK(kl >= 0.0);
        if (p != q) CHECK(kl > 0.0);
    }
}

TEST_CASE("gaklr_loss adds the mean KL over retain pairs") {
    const std::vector<SequenceLogProb> forget = {seq({-1.0})};
    CHECK(gaklr_loss(forget, {{{0.5, 0.5}, {0.5, 0.5}}}) == -1.0);
    CHECK(gaklr_loss(forget, {{{0.5, 0.5}, {0.25, 0.75}}}) ==
          doctest::Approx(-1.0 + 0.1438410362258904).epsilon(1e-12));
    CHECK_VALIDATION_KIND(gaklr_loss({}, {{{0.5, 0.5}, {0.5, 0.5}}}), ErrorKind::EmptyBatch);
    CHECK_VALIDATION_KIND(gaklr_loss(forget, {}), ErrorKind::EmptyBatch);
}

TEST_CASE("npo_loss hits its fixed points") {
    const auto at_ratio = [](double ratio) {
        // sums differ by `ratio` while both stay <= 0
        const double cur_sum = ratio < 0.0 ? -1.0 + ratio : -1.0;
        const double ref_sum = cur_sum - ratio;
        return seq({cur_sum / 2.0, cur_sum / 2.0},
                   std::vector<double>{ref_sum / 2.0, ref_sum / 2.0});
    };

    for (double beta : {0.01, 0.1, 1.0, 10.0}) {
        CHECK(npo_loss({at_ratio(0.0)}, beta) ==
              doctest::Approx(std::log(2.0)).epsilon(1e-15));
    }
    // deeply negative log ratio drives the loss to zero
    CHECK(npo_loss({seq({-51.0}, std::vector<double>{-1.0})}, 1.0) < 1e-20);
    // sigma(1) = 0.731...; -log(1 - sigma(1)) = softplus(1)
    CHECK(npo_loss({seq({0.0}, std::vector<double>{-1.0})}, 1.0) ==
          doctest::Approx(1.3132616875182228).epsilon(1e-15));

    CHECK_VALIDATION_KIND(npo_loss({seq({-1.0})}, 1.0), ErrorKind::MissingReference);
    CHECK_VALIDATION_KIND(npo_loss({at_ratio(0.0)}, 0.0), ErrorKind::InvalidConfig);
    CHECK_VALIDATION_KIND(npo_loss({seq({-1.0}, std::vector<double>{-1.0, -2.0})}, 1.0),
                          ErrorKind::DimensionMismatch);
    CHECK_VALIDATION_KIND(npo_loss({}, 1.0), ErrorKind::EmptyBatch);

    // strictly increasing in the log ratio, positive everywhere
    double prev = 0.0;
    for (double ratio : {-40.0, -4.0, -1.0, 0.0, 1.0, 4.0, 40.0}) {
        const double loss = npo_loss({at_ratio(ratio)}, 0.5);
        CHECK(loss > 0.0);
        CHECK(loss > prev);
        prev = loss;
    }
}

TEST_CASE("minmax_normalize maps to the unit interval") {
    CHECK(minmax_normalize({1.0, 2.0, 3.0}) == std::vector<double>{0.0, 0.5, 1.0});
    CHECK(minmax_normalize({5.0, 5.0, 5.0}) == std::vector<double>{0.0, 0.0, 0.0});
    CHECK(minmax_normalize({-1.0, 1.0}) == std::vector<double>{0.0, 1.0});
    CHECK_VALIDATION_KIND(minmax_normalize({}), ErrorKind::EmptyInput);

    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> v(2 + rng() % 10);
        for (auto& x : v) x = static_cast<double>(rng() % 1000) - 500.0;
        const auto normalized = minmax_normalize(v);
        for (double x : normalized) {
            CHECK(x >= 0.0);
            CHECK(x <= 1.0);
        }
        if (*std::max_element(v.begin(), v.end()) != *std::min_element(v.begin(), v.end())) {
            CHECK(minmax_normalize(normalized) == normalized); // idempotent
        }
    }
}

TEST_CASE("importance_scores computes the four statistics per neuron") {
    SUBCASE("two samples, zero mean") {
        const std::vector<ActivationSample> samples = {{{1.0}, DatasetTag::Forget},
                                                       {{-1.0}, DatasetTag::Forget}};
        const NeuronImportance stats = importance_scores(samples);
        CHECK(stats.abs_mean == std::vector<double>{1.0});
        CHECK(stats.pos_freq == std::vector<double>{0.5});
        CHECK(stats.rms == std::vector<double>{1.0});
        CHECK(stats.std_dev == std::vector<double>{1.0});
    }
    SUBCASE("all-zero activations") {
        const std::vector<ActivationSample> samples = {{{0.0}, DatasetTag::Forget},
                                                       {{0.0}, DatasetTag::Forget}};
        const NeuronImportance stats = importance_scores(samples);
        CHECK(stats.std_dev == std::vector<double>{0.0});
        CHECK(stats.abs_mean == std::vector<double>{0.0});
        CHECK(stats.pos_freq == std::vector<double>{0.0});
        CHECK(stats.rms == std::vector<double>{0.0});
    }
    SUBCASE("single sample") {
        const std::vector<ActivationSample> samples = {{{2.0}, DatasetTag::Retain}};
        const NeuronImportance stats = importance_scores(samples);
        CHECK(stats.std_dev == std::vector<double>{0.0});
        CHECK(stats.abs_mean == std::vector<double>{2.0});
        CHECK(stats.pos_freq == std::vector<double>{1.0});
        CHECK(stats.rms == std::vector<double>{2.0});
    }
    SUBCASE("tag filtering and errors") {
        const std::vector<ActivationSample> samples = {{{1.0}, DatasetTag::Forget}};
        CHECK_NOTHROW(importance_scores(samples, DatasetTag::Forget));
        CHECK_VALIDATION_KIND(importance_scores(samples, DatasetTag::Retain),
                              ErrorKind::EmptyDataset);
        CHECK_VALIDATION_KIND(
            importance_scores({{{1.0}, DatasetTag::Forget}, {{1.0, 2.0}, DatasetTag::Forget}}),
            ErrorKind::DimensionMismatch);
    }
}

TEST_CASE("agnostic_importance is the normalized forget/retain ratio") {
    // three neurons whose per-statistic MinMax values come out to
    // forget sums {0, 2, 4} and retain sums {0, 1, 4}
    NeuronImportance forget_stats;
    forget_stats.std_dev = {0.0, 1.0, 2.0};
    forget_stats.abs_mean = {0.0, 2.0, 4.0};
    forget_stats.pos_freq = {0.0, 0.5, 1.0};
    forget_stats.rms = {0.0, 3.0, 6.0};
    NeuronImportance retain_stats;
    retain_stats.std_dev = {0.0, 0.25, 1.0};
    retain_stats.abs_mean = {0.0, 0.25, 1.0};
    retain_stats.pos_freq = {0.0, 0.25, 1.0};
    retain_stats.rms = {0.0, 0.25, 1.0};

    const auto scores = agnostic_importance(forget_stats, retain_stats, 1e-6);
    CHECK(scores[0] == 0.0);                                // zero numerator
    CHECK(scores[1] == doctest::Approx(2.0).epsilon(1e-5)); // 2 / (1 + eps)
    CHECK(scores[2] == doctest::Approx(4.0 / (4.0 + 1e-6)).epsilon(1e-12));

    SUBCASE("epsilon floor when the retain side is flat") {
        NeuronImportance flat_retain;
        flat_retain.std_dev = {5.0, 5.0, 5.0};
        flat_retain.abs_mean = {5.0, 5.0, 5.0};
        flat_retain.pos_freq = {1.0, 1.0, 1.0};
        flat_retain.rms = {5.0, 5.0, 5.0};
        const auto floored = agnostic_importance(forget_stats, flat_retain, 1e-6);
        CHECK(floored[2] == doctest::Approx(4.0e6).epsilon(1e-9));
        CHECK(floored[0] == 0.0);
    }
    SUBCASE("dimension mismatch") {
        NeuronImportance two;
        two.std_dev = {0.0, 1.0};
        two.abs_mean = {0.0, 1.0};
        two.pos_freq = {0.0, 1.0};
        two.rms = {0.0, 1.0};
        CHECK_VALIDATION_KIND(agnostic_importance(forget_stats, two, 1e-6),
                              ErrorKind::DimensionMismatch);
    }
}

TEST_CASE("agnostic_importance is invariant to positive scaling of activations") {
    std::mt19937_64 rng(19);
    std::vector<ActivationSample> samples;
    for (int s = 0; s < 12; ++s) {
        ActivationSample sample;
        sample.tag = s % 2 ? DatasetTag::Retain : DatasetTag::Forget;
        for (int j = 0; j < 5; ++j) {
            sample.values.push_back(static_cast<double>(rng() % 200) / 10.0 - 10.0);
        }
        samples.push_back(std::move(sample));
    }
    const auto base = agnostic_importance_from_samples(samples, 1e-6);

    std::vector<ActivationSample> scaled = samples;
    for (auto& sample : scaled) {
        if (sample.tag == DatasetTag::Forget) {
            for (auto& z : sample.values) z *= 3.5;
        }
    }
    const auto rescaled = agnostic_importance_from_samples(scaled, 1e-6);
    for (std::size_t j = 0; j < base.size(); ++j) {
        CHECK(rescaled[j] == doctest::Approx(base[j]).epsilon(1e-9));
    }
}

TEST_CASE("activation dumps round-trip through JSONL and the binary format") {
    std::mt19937_64 rng(29);
    std::vector<ActivationSample> samples;
    for (int s = 0; s < 7; ++s) {
        ActivationSample sample;
        sample.tag = s % 3 ? DatasetTag::Retain : DatasetTag::Forget;
        for (int j = 0; j < 4; ++j) {
            sample.values.push_back(static_cast<double>(rng()) / 1e12 - 7.0);
        }
        samples.push_back(std::move(sample));
    }

    std::stringstream binary;
    save_activations_binary(samples, binary);
    const auto reloaded = load_activations_binary(binary);
    REQUIRE(reloaded.size() == samples.size());
    for (std::size_t s = 0; s < samples.size(); ++s) {
        CHECK(reloaded[s].tag == samples[s].tag);
        CHECK(reloaded[s].values == samples[s].values); // bit-exact
    }

    std::stringstream truncated("MMUACT1");
    CHECK_VALIDATION_KIND(load_activations_binary(truncated), ErrorKind::MalformedLine);

    std::stringstream jsonl;
    jsonl << R"({"neuron_values": [1.0, -2.5], "tag": "forget"})" << "\n"
          << R"({"neuron_values": [0.0, 4.0], "tag": "retain"})" << "\n";
    const auto from_jsonl = load_activations_jsonl(jsonl);
    REQUIRE(from_jsonl.size() == 2);
    CHECK(from_jsonl[0].tag == DatasetTag::Forget);
    CHECK(from_jsonl[1].values == std::vector<double>{0.0, 4.0});
}

TEST_CASE("log-prob dumps parse with optional references") {
    std::stringstream in;
    in << R"({"logp_current": [-1.0, -0.5], "logp_reference": [-1.0, -1.0]})" << "\n"
       << R"({"logp_current": [-2.0], "logp_reference": null})" << "\n";
    const auto seqs = load_logprobs_jsonl(in);
    REQUIRE(seqs.size() == 2);
    CHECK(seqs[0].logp_reference.has_value());
    CHECK_FALSE(seqs[1].logp_reference.has_value());

    std::stringstream bad("{\"logp_current\": \"oops\"}\n");
    CHECK_VALIDATION_KIND(load_logprobs_jsonl(bad), ErrorKind::MalformedLine);
}
