#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "mmu/metrics.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace mmu;
using support::make_scores;

TEST_CASE("norm_probability is the geometric mean of token probabilities") {
    CHECK(norm_probability(std::log(0.25) + std::log(0.25), 2) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(norm_probability(0.0, 7) == 1.0);
    CHECK(norm_probability(std::log(0.5), 1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_VALIDATION_KIND(norm_probability(-1.0, 0), ErrorKind::ZeroLengthAnswer);
    CHECK_VALIDATION_KIND(norm_probability(0.5, 3), ErrorKind::PositiveLogProb);
}

TEST_CASE("forgetting_scores aggregates SE and prob per instance") {
    SUBCASE("gen mode over ten languages") {
        support::MatrixBuilder builder;
        for (int l = 0; l < 10; ++l) builder.language("l" + std::to_string(l));
        for (int l = 0; l < 10; ++l) {
            builder.cell("i1", "l" + std::to_string(l), true, l < 3 ? 1 : 0);
            builder.cell("i2", "l" + std::to_string(l), false, 1);
        }
        const auto scores = forgetting_scores(builder.build(), ScoreMode::Gen,
                                              [] {
                                                  std::vector<std::string> v;
                                                  for (int l = 0; l < 10; ++l)
                                                      v.push_back("l" + std::to_string(l));
                                                  return v;
                                              }());
        CHECK(scores.forget.at("i1") == doctest::Approx(0.7).epsilon(1e-15));
        CHECK(scores.retain.at("i2") == 0.0); // SE = 1 everywhere: fully retained
    }
    SUBCASE("prob mode averages the probabilities") {
        support::MatrixBuilder builder;
        builder.language("en").language("de");
        builder.cell("i1", "en", true, std::nullopt, 0.9);
        builder.cell("i1", "de", true, std::nullopt, 0.1);
        builder.cell("i2", "en", false, std::nullopt, 1.0);
        builder.cell("i2", "de", false, std::nullopt, 1.0);
        const auto scores = forgetting_scores(builder.build(), ScoreMode::Prob, {"en", "de"});
        CHECK(scores.forget.at("i1") == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(scores.retain.at("i2") == 0.0);
    }
    SUBCASE("missing field and missing cell are distinct hard errors") {
        support::MatrixBuilder builder;
        builder.language("en").language("de");
        builder.cell("i1", "en", true, 1);               // no prob
        builder.cell("i1", "de", true, 1, 0.5);
        builder.cell("i2", "en", false, 1, 0.5);
        builder.cell("i2", "de", false, 1, 0.5);
        const EvalMatrix matrix = builder.build();
        CHECK_VALIDATION_KIND(forgetting_scores(matrix, ScoreMode::Prob, {"en", "de"}),
                              ErrorKind::MissingField);
        CHECK_NOTHROW(forgetting_scores(matrix, ScoreMode::Gen, {"en", "de"}));

        support::MatrixBuilder sparse;
        sparse.language("en").language("de");
        sparse.cell("i1", "en", true, 1);
        sparse.cell("i2", "en", false, 1);
        sparse.cell("i2", "de", false, 1);
        CHECK_VALIDATION_KIND(forgetting_scores(sparse.build(), ScoreMode::Gen, {"en", "de"}),
                              ErrorKind::MissingCell);
    }
}

TEST_CASE("Gen-mode scores live on the 1/|langs| lattice") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n_langs = 1 + rng() % 6;
        const EvalMatrix matrix = support::random_matrix(rng, 1 + rng() % 6, 1 + rng() % 6, n_langs);
        const auto langs = matrix.spec().language_codes();
        const auto gen = forgetting_scores(matrix, ScoreMode::Gen, langs);
        for (const auto& scores : {gen.forget, gen.retain}) {
            for (const auto& [id, s] : scores) {
                const double k = std::round(s * static_cast<double>(n_langs));
                CHECK(s == static_cast<double>(k) / static_cast<double>(n_langs));
            }
        }
        const auto prob = forgetting_scores(matrix, ScoreMode::Prob, langs);
        for (const auto& scores : {prob.forget, prob.retain}) {
            for (const auto& [id, s] : scores) {
                CHECK(s >= 0.0);
                CHECK(s <= 1.0);
            }
        }
    }
}

TEST_CASE("kss_roc matches the stated examples") {
    CHECK(kss_roc(make_scores({0.9, 0.8}, {0.1, 0.2})) == 1.0);
    CHECK(kss_roc(make_scores({0.5}, {0.5})) == 0.5);
    CHECK(kss_roc(make_scores({0.8, 0.3}, {0.5, 0.2})) == 0.75);
    CHECK_VALIDATION_KIND(kss_roc(make_scores({}, {0.5})), ErrorKind::EmptyClass);
    CHECK_VALIDATION_KIND(kss_roc(make_scores({0.5}, {})), ErrorKind::EmptyClass);
}

TEST_CASE("kss_roc equals the pairwise rank oracle exactly") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 400; ++trial) {
        const std::size_t n_f = 1 + rng() % 50;
        const std::size_t n_r = 1 + rng() % 50;
        std::vector<double> forget(n_f), retain(n_r);
        // coarse grid forces plenty of ties
        for (auto& v : forget) v = static_cast<double>(rng() % 8) / 7.0;
        for (auto& v : retain) v = static_cast<double>(rng() % 8) / 7.0;
        const auto scores = make_scores(forget, retain);
        CHECK(kss_roc(scores) == oracle::roc_auc(forget, retain));
    }
}

TEST_CASE("kss_roc rank-statistic properties") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> forget(1 + rng() % 20), retain(1 + rng() % 20);
        for (auto& v : forget) v = static_cast<double>(rng() % 10) / 9.0;
        for (auto& v : retain) v = static_cast<double>(rng() % 10) / 9.0;
        const double base = kss_roc(make_scores(forget, retain));

        // invariant under any strictly increasing transform
        auto squash = [](std::vector<double> v) {
            for (auto& x : v) x = 1.0 / (1.0 + std::exp(-(3.0 * x + 0.25)));
            return v;
        };
        CHECK(kss_roc(make_scores(squash(forget), squash(retain))) == base);

        // swapping the class labels mirrors the statistic
        CHECK(kss_roc(make_scores(retain, forget)) == doctest::Approx(1.0 - base).epsilon(1e-12));
    }
}

TEST_CASE("kss_pr matches the stated examples") {
    CHECK(kss_pr(make_scores({1.0}, {0.0})) == 1.0);
    // one tied threshold admits everything: precision equals prevalence
    CHECK(kss_pr(make_scores({0.5}, {0.5, 0.5, 0.5})) == 0.25);
    // top-ranked item is a false positive, the positive arrives second
    CHECK(kss_pr(make_scores({0.9}, {0.95, 0.1})) == 0.5);
    CHECK_VALIDATION_KIND(kss_pr(make_scores({}, {0.5})), ErrorKind::EmptyClass);
}

TEST_CASE("kss_pr equals the precision/recall-table oracle exactly") {
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 400; ++trial) {
        const std::size_t n_f = 1 + rng() % 50;
        const std::size_t n_r = 1 + rng() % 50;
        std::vector<double> forget(n_f), retain(n_r);
        for (auto& v : forget) v = static_cast<double>(rng() % 8) / 7.0;
        for (auto& v : retain) v = static_cast<double>(rng() % 8) / 7.0;
        CHECK(kss_pr(make_scores(forget, retain)) == oracle::average_precision(forget, retain));
    }
}

TEST_CASE("confusion_counts uses an inclusive threshold") {
    const auto scores = make_scores({0.8, 0.3}, {0.5, 0.2});

    const ConfusionCounts at_half = confusion_counts(scores, 0.5);
    CHECK(at_half.tp == 1);
    CHECK(at_half.fn == 1);
    CHECK(at_half.fp == 1);
    CHECK(at_half.tn == 1);

    const ConfusionCounts all_positive = confusion_counts(scores, 0.0);
    CHECK(all_positive.fn == 0);
    CHECK(all_positive.tn == 0);

    const ConfusionCounts none = confusion_counts(scores, 0.81);
    CHECK(none.tp == 0);
    CHECK(none.fp == 0);
}

TEST_CASE("confusion rates are monotone in the threshold") {
    std::mt19937_64 rng(41);
    std::vector<double> forget(20), retain(30);
    for (auto& v : forget) v = static_cast<double>(rng() % 10) / 9.0;
    for (auto& v : retain) v = static_cast<double>(rng() % 10) / 9.0;
    const auto scores = make_scores(forget, retain);

    double prev_tpr = 2.0, prev_fpr = 2.0;
    for (double threshold = 0.0; threshold <= 1.01; threshold += 0.05) {
        const ConfusionCounts c = confusion_counts(scores, threshold);
        CHECK(c.tp + c.fn == static_cast<long long>(forget.size()));
        CHECK(c.fp + c.tn == static_cast<long long>(retain.size()));
        const double tpr = static_cast<double>(c.tp) / static_cast<double>(forget.size());
        const double fpr = static_cast<double>(c.fp) / static_cast<double>(retain.size());
        CHECK(tpr <= prev_tpr);
        CHECK(fpr <= prev_fpr);
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
}

namespace {

EvalMatrix persistence_fixture(int se_i1_l2, int se_i2_l2, int se_l1 = 0) {
    support::MatrixBuilder builder;
    builder.language("l1").language("l2");
    builder.cell("i1", "l1", true, se_l1);
    builder.cell("i2", "l1", true, se_l1);
    builder.cell("i1", "l2", true, se_i1_l2);
    builder.cell("i2", "l2", true, se_i2_l2);
    builder.cell("r1", "l1", false, 1);
    builder.cell("r1", "l2", false, 1);
    return builder.build();
}

} // namespace

TEST_CASE("pairwise_persistence conditions on forgetting in the base language") {
    CHECK(pairwise_persistence(persistence_fixture(1, 0), "l1", "l2") == 0.5);
    // nothing forgotten in l1: conditioning set empty
    CHECK_FALSE(pairwise_persistence(persistence_fixture(1, 0, 1), "l1", "l2").has_value());
    // nothing persists in l2
    CHECK(pairwise_persistence(persistence_fixture(0, 0), "l1", "l2") == 0.0);
    CHECK_VALIDATION_KIND(pairwise_persistence(persistence_fixture(1, 0), "l1", "l1"),
                          ErrorKind::SameLanguage);
}

TEST_CASE("pairwise_persistence is a counting identity") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 100; ++trial) {
        const EvalMatrix matrix =
            support::random_matrix(rng, 2 + rng() % 8, 1 + rng() % 4, 2 + rng() % 4);
        const auto langs = matrix.spec().language_codes();
        for (std::size_t a = 0; a < langs.size(); ++a) {
            for (std::size_t b = 0; b < langs.size(); ++b) {
                if (a == b) continue;
                const auto counts = oracle::persistence_sets(matrix, langs[a], langs[b]);
                const auto ps = pairwise_persistence(matrix, langs[a], langs[b]);
                if (counts.forgotten_in_l1.empty()) {
                    CHECK_FALSE(ps.has_value());
                } else {
                    CHECK(*ps == static_cast<double>(counts.forgotten_l1_retained_l2.size()) /
                                     static_cast<double>(counts.forgotten_in_l1.size()));
                }
            }
        }
    }
}

TEST_CASE("kps averages defined pairs and reports coverage") {
    // l2 persists 1/5, l3 persists 2/5 -> KPS = 0.3
    support::MatrixBuilder builder;
    builder.language("l1").language("l2").language("l3");
    for (int i = 0; i < 5; ++i) {
        const std::string id = "f" + std::to_string(i);
        builder.cell(id, "l1", true, 0);
        builder.cell(id, "l2", true, i < 1 ? 1 : 0);
        builder.cell(id, "l3", true, i < 2 ? 1 : 0);
    }
    builder.cell("r0", "l1", false, 1).cell("r0", "l2", false, 1).cell("r0", "l3", false, 1);
    const EvalMatrix matrix = builder.build();

    const KpsResult result = kps(matrix, "l1", {"l2", "l3"});
    CHECK(*result.value == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(result.defined_pairs == 2);
    CHECK(result.coverage() == 1.0);

    CHECK_VALIDATION_KIND(kps(matrix, "l1", {"l1", "l2"}), ErrorKind::BaseInComparison);
    CHECK_VALIDATION_KIND(kps(matrix, "l1", {}), ErrorKind::EmptyComparison);
}

TEST_CASE("kps propagates undefined pairs") {
    // forget set fully retained in l1 and l2 -> both pairs undefined from those bases;
    // from l3 everything is forgotten, so both pairs are defined
    support::MatrixBuilder builder;
    builder.language("l1").language("l2").language("l3");
    for (int i = 0; i < 3; ++i) {
        const std::string id = "f" + std::to_string(i);
        builder.cell(id, "l1", true, 1);
        builder.cell(id, "l2", true, 1);
        builder.cell(id, "l3", true, 0);
    }
    builder.cell("r0", "l1", false, 1).cell("r0", "l2", false, 1).cell("r0", "l3", false, 1);
    const EvalMatrix matrix = builder.build();

    const KpsResult all_undefined = kps(matrix, "l1", {"l2"});
    CHECK_FALSE(all_undefined.value.has_value());
    CHECK(all_undefined.defined_pairs == 0);

    // one defined pair (from l3 to l2: persisted everywhere -> 1.0), one
    // undefined is impossible from a single base, so mix bases via reports
    support::MatrixBuilder mixed;
    mixed.language("a").language("b").language("c");
    // from base a: I(a) empty (SE=1 everywhere) -> undefined
    // from base c: ps(c,b) defined
    for (int i = 0; i < 2; ++i) {
        const std::string id = "f" + std::to_string(i);
        mixed.cell(id, "a", true, 1);
        mixed.cell(id, "b", true, i % 2);
        mixed.cell(id, "c", true, 0);
    }
    mixed.cell("r0", "a", false, 1).cell("r0", "b", false, 1).cell("r0", "c", false, 1);
    const EvalMatrix mixed_matrix = mixed.build();
    const KpsResult partial = kps(mixed_matrix, "c", {"a", "b"});
    // ps(c,a) = 1.0 (both retained in a), ps(c,b) = 0.5
    CHECK(*partial.value == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(partial.defined_pairs == 2);
}

TEST_CASE("kps case presets select the comparison set") {
    support::MatrixBuilder builder;
    builder.language("en").language("de").language("af", LanguageRole::HoldOut);
    for (const std::string id : {"f0", "f1"}) {
        builder.cell(id, "en", true, 0);
        builder.cell(id, "de", true, id == "f0" ? 1 : 0);
        builder.cell(id, "af", true, 1);
    }
    builder.cell("r0", "en", false, 1).cell("r0", "de", false, 1).cell("r0", "af", false, 1);
    const EvalMatrix matrix = builder.build();

    const KpsResult case1 = kps_case(matrix, "en", KpsCase::Case1HoldOut);
    CHECK(*case1.value == 1.0); // everything forgotten in en persists in af

    const KpsResult case2 = kps_case(matrix, "en", KpsCase::Case2TrainMinusBase);
    CHECK(*case2.value == 0.5); // persists in de for one of two

    CHECK_VALIDATION_KIND(kps_case(matrix.sliced_languages({"en", "de"}), "en",
                                   KpsCase::Case1HoldOut),
                          ErrorKind::EmptyComparison);
}

TEST_CASE("relative_increase reproduces the subscript arithmetic") {
    CHECK(relative_increase(0.57, 0.52) == 10);
    CHECK(relative_increase(0.52, 0.52) == 0);
    CHECK(relative_increase(0.88, 0.01) == 8700);
    CHECK(relative_increase(0.99, 0.45) == 120);
    // half away from zero, both signs
    CHECK(relative_increase(1.145, 1.0) == 15);
    CHECK(relative_increase(0.855, 1.0) == -15);
    CHECK(relative_increase(0.45, 0.52) == -13);
    CHECK_VALIDATION_KIND(relative_increase(0.5, 0.0), ErrorKind::ZeroBaseline);
    CHECK_VALIDATION_KIND(relative_increase(0.5, -0.1), ErrorKind::ZeroBaseline);
}

TEST_CASE("persistence_report serializes the full pairwise matrix") {
    support::MatrixBuilder builder;
    builder.language("en").language("de").language("af", LanguageRole::HoldOut);
    for (const std::string id : {"f0", "f1"}) {
        builder.cell(id, "en", true, 0);
        builder.cell(id, "de", true, 0);
        builder.cell(id, "af", true, 1);
    }
    builder.cell("r0", "en", false, 1).cell("r0", "de", false, 1).cell("r0", "af", false, 1);
    const EvalMatrix matrix = builder.build();

    const PersistenceReport report =
        persistence_report(matrix, matrix.spec().training_languages(), KpsCase::Case1HoldOut);
    CHECK(report.pairwise.size() == 2); // (en,af), (de,af)
    CHECK(*report.kps_by_base.at("en").value == 1.0);

    const auto j = persistence_report_json(report);
    CHECK(j["case"] == "case1");
    CHECK(j["pairwise"]["en"]["af"] == 1.0);
    CHECK(j["kps"]["en"]["coverage"] == 1.0);
}
