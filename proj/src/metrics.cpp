#include "mmu/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace mmu {

using nlohmann::json;

const char* to_string(ScoreMode mode) {
    return mode == ScoreMode::Gen ? "gen" : "prob";
}

ScoreMode score_mode_from_string(const std::string& s) {
    if (s == "gen") return ScoreMode::Gen;
    if (s == "prob") return ScoreMode::Prob;
    throw ValidationError(ErrorKind::InvalidConfig, "unknown score mode '" + s + "'");
}

const char* to_string(KpsCase c) {
    switch (c) {
        case KpsCase::Case1HoldOut:        return "case1";
        case KpsCase::Case2TrainMinusBase: return "case2";
        case KpsCase::Custom:              return "custom";
    }
    return "custom";
}

double norm_probability(double log_prob_sum, int token_count) {
    if (token_count < 1) {
        throw ValidationError(ErrorKind::ZeroLengthAnswer,
                              "token_count=" + std::to_string(token_count));
    }
    if (log_prob_sum > 0.0) {
        throw ValidationError(ErrorKind::PositiveLogProb,
                              "sum of log probabilities must be <= 0, got " +
                                  std::to_string(log_prob_sum));
    }
    return std::exp(log_prob_sum / static_cast<double>(token_count));
}

ForgettingScores forgetting_scores(const EvalMatrix& matrix, ScoreMode mode,
                                   const std::vector<std::string>& langs) {
    if (langs.empty()) {
        throw ValidationError(ErrorKind::EmptyComparison, "language subset is empty");
    }
    for (const auto& code : langs) {
        if (!matrix.spec().has_language(code)) {
            throw ValidationError(ErrorKind::UnknownLanguage, "'" + code + "'");
        }
    }

    ForgettingScores out;
    out.mode = mode;
    out.langs = langs;
    const auto n_langs = static_cast<double>(langs.size());

    auto score_of = [&](const std::string& id) -> double {
        if (mode == ScoreMode::Gen) {
            // S_i = (#langs with SE=0) / |langs|, so the score stays exactly
            // on the k/|langs| lattice.
            long long zeros = 0;
            for (const auto& lang : langs) {
                const EvalRecord& rec = matrix.at(id, lang);
                if (!rec.se) {
                    throw ValidationError(ErrorKind::MissingField,
                                          "se missing for (" + id + ", " + lang + ")");
                }
                if (*rec.se == 0) ++zeros;
            }
            return static_cast<double>(zeros) / n_langs;
        }
        double prob_sum = 0.0;
        for (const auto& lang : langs) {
            const EvalRecord& rec = matrix.at(id, lang);
            if (!rec.prob) {
                throw ValidationError(ErrorKind::MissingField,
                                      "prob missing for (" + id + ", " + lang + ")");
            }
            prob_sum += *rec.prob;
        }
        return 1.0 - prob_sum / n_langs;
    };

    for (const auto& id : matrix.spec().forget_ids()) out.forget[id] = score_of(id);
    for (const auto& id : matrix.spec().retain_ids()) out.retain[id] = score_of(id);
    return out;
}

namespace {

struct LabeledScore {
    double score;
    bool positive; // forget-set membership
};

std::vector<LabeledScore> pooled(const ForgettingScores& s) {
    if (s.forget.empty() || s.retain.empty()) {
        throw ValidationError(ErrorKind::EmptyClass,
                              "need at least one forget and one retain score");
    }
    std::vector<LabeledScore> all;
    all.reserve(s.forget.size() + s.retain.size());
    for (const auto& [id, v] : s.forget) all.push_back({v, true});
    for (const auto& [id, v] : s.retain) all.push_back({v, false});
    return all;
}

} // namespace

double kss_roc(const ForgettingScores& scores) {
    std::vector<LabeledScore> all = pooled(scores);
    std::sort(all.begin(), all.end(),
              [](const LabeledScore& a, const LabeledScore& b) { return a.score < b.score; });

    // Doubled midranks stay integral, so the numerator is exact and the
    // result matches the pairwise win/tie count bit for bit.
    const std::size_t n = all.size();
    long long rank2_sum_pos = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && all[j].score == all[i].score) ++j;
        const long long rank2 = static_cast<long long>(i) + static_cast<long long>(j) + 1;
        for (std::size_t k = i; k < j; ++k) {
            if (all[k].positive) rank2_sum_pos += rank2;
        }
        i = j;
    }

    const long long n_pos = static_cast<long long>(scores.forget.size());
    const long long n_neg = static_cast<long long>(scores.retain.size());
    const long long numerator2 = rank2_sum_pos - n_pos * (n_pos + 1);
    return static_cast<double>(numerator2) / static_cast<double>(2 * n_pos * n_neg);
}

double kss_pr(const ForgettingScores& scores) {
    std::vector<LabeledScore> all = pooled(scores);
    std::sort(all.begin(), all.end(),
              [](const LabeledScore& a, const LabeledScore& b) { return a.score > b.score; });

    const double n_pos = static_cast<double>(scores.forget.size());
    long long tp = 0;
    long long fp = 0;
    double recall_prev = 0.0;
    double ap = 0.0;

    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].score == all[i].score) ++j;
        for (std::size_t k = i; k < j; ++k) {
            if (all[k].positive) ++tp; else ++fp;
        }
        const double recall = static_cast<double>(tp) / n_pos;
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        ap += (recall - recall_prev) * precision;
        recall_prev = recall;
        i = j;
    }
    return ap;
}

ConfusionCounts confusion_counts(const ForgettingScores& scores, double threshold) {
    ConfusionCounts c;
    for (const auto& [id, v] : scores.forget) {
        if (v >= threshold) ++c.tp; else ++c.fn;
    }
    for (const auto& [id, v] : scores.retain) {
        if (v >= threshold) ++c.fp; else ++c.tn;
    }
    return c;
}

std::optional<double> pairwise_persistence(const EvalMatrix& matrix,
                                           const std::string& l1,
                                           const std::string& l2) {
    if (l1 == l2) {
        throw ValidationError(ErrorKind::SameLanguage, "l1 and l2 are both '" + l1 + "'");
    }
    for (const auto& code : {l1, l2}) {
        if (!matrix.spec().has_language(code)) {
            throw ValidationError(ErrorKind::UnknownLanguage, "'" + code + "'");
        }
    }

    long long conditioned = 0; // |{i in forget : SE(i,l1) = 0}|
    long long persisted = 0;   // of those, SE(i,l2) = 1
    for (const auto& id : matrix.spec().forget_ids()) {
        const EvalRecord& base = matrix.at(id, l1);
        const EvalRecord& other = matrix.at(id, l2);
        if (!base.se || !other.se) {
            throw ValidationError(ErrorKind::MissingField,
                                  "se missing for forget instance '" + id + "'");
        }
        if (*base.se == 0) {
            ++conditioned;
            if (*other.se == 1) ++persisted;
        }
    }
    if (conditioned == 0) return std::nullopt;
    return static_cast<double>(persisted) / static_cast<double>(conditioned);
}

KpsResult kps(const EvalMatrix& matrix, const std::string& l1,
              const std::vector<std::string>& comparison) {
    if (comparison.empty()) {
        throw ValidationError(ErrorKind::EmptyComparison, "comparison set is empty");
    }
    if (std::find(comparison.begin(), comparison.end(), l1) != comparison.end()) {
        throw ValidationError(ErrorKind::BaseInComparison,
                              "base language '" + l1 + "' is in the comparison set");
    }

    KpsResult out;
    out.total_pairs = comparison.size();
    double sum = 0.0;
    for (const auto& l2 : comparison) {
        if (auto ps = pairwise_persistence(matrix, l1, l2)) {
            sum += *ps;
            ++out.defined_pairs;
        }
    }
    if (out.defined_pairs > 0) {
        out.value = sum / static_cast<double>(out.defined_pairs);
    }
    return out;
}

KpsResult kps_case(const EvalMatrix& matrix, const std::string& l1, KpsCase c) {
    std::vector<std::string> comparison;
    switch (c) {
        case KpsCase::Case1HoldOut:
            comparison = matrix.spec().holdout_languages();
            break;
        case KpsCase::Case2TrainMinusBase: {
            for (const auto& code : matrix.spec().training_languages()) {
                if (code != l1) comparison.push_back(code);
            }
            break;
        }
        case KpsCase::Custom:
            throw ValidationError(ErrorKind::InvalidConfig,
                                  "Custom KPS needs an explicit comparison set");
    }
    if (comparison.empty()) {
        throw ValidationError(ErrorKind::EmptyComparison,
                              std::string("no languages available for ") + to_string(c));
    }
    return kps(matrix, l1, comparison);
}

long long relative_increase(double method_value, double baseline_value) {
    if (baseline_value <= 0.0) {
        throw ValidationError(ErrorKind::ZeroBaseline,
                              "baseline=" + std::to_string(baseline_value));
    }
    const double pct = (method_value - baseline_value) / baseline_value * 100.0;
    return static_cast<long long>(pct >= 0.0 ? std::floor(pct + 0.5) : std::ceil(pct - 0.5));
}

PersistenceReport persistence_report(const EvalMatrix& matrix,
                                     const std::vector<std::string>& base_langs,
                                     KpsCase c) {
    PersistenceReport report;
    report.comparison_set_label = c;
    for (const auto& l1 : base_langs) {
        std::vector<std::string> comparison;
        if (c == KpsCase::Case1HoldOut) {
            comparison = matrix.spec().holdout_languages();
        } else {
            for (const auto& code : matrix.spec().training_languages()) {
                if (code != l1) comparison.push_back(code);
            }
        }
        if (comparison.empty()) {
            throw ValidationError(ErrorKind::EmptyComparison,
                                  std::string("no comparison languages for ") + to_string(c));
        }
        for (const auto& l2 : comparison) {
            report.pairwise[{l1, l2}] = pairwise_persistence(matrix, l1, l2);
        }
        report.kps_by_base[l1] = kps(matrix, l1, comparison);
    }
    return report;
}

json kss_result_json(const std::string& metric, ScoreMode mode,
                     const std::string& case_label, double value,
                     const ForgettingScores& scores) {
    return json{{"metric", metric},
                {"mode", to_string(mode)},
                {"case", case_label},
                {"value", value},
                {"n_forget", scores.forget.size()},
                {"n_retain", scores.retain.size()}};
}

json persistence_report_json(const PersistenceReport& report) {
    json pairwise = json::object();
    for (const auto& [pair, value] : report.pairwise) {
        pairwise[pair.first][pair.second] = value ? json(*value) : json(nullptr);
    }
    json aggregates = json::object();
    for (const auto& [l1, result] : report.kps_by_base) {
        aggregates[l1] = {{"value", result.value ? json(*result.value) : json(nullptr)},
                          {"defined_pairs", result.defined_pairs},
                          {"total_pairs", result.total_pairs},
                          {"coverage", result.coverage()}};
    }
    return json{{"case", to_string(report.comparison_set_label)},
                {"pairwise", pairwise},
                {"kps", aggregates}};
}

} // namespace mmu
