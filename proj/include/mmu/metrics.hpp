#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmu/core.hpp"

namespace mmu {

enum class ScoreMode { Gen, Prob };

const char* to_string(ScoreMode mode);
ScoreMode score_mode_from_string(const std::string& s);

/// Per-instance forgetting scores S_i over one language subset. The forget
/// map covers the forget ids of the source matrix, the retain map its retain
/// ids. Gen-mode scores lie on the lattice {0, 1/|langs|, ..., 1}.
struct ForgettingScores {
    ScoreMode mode = ScoreMode::Gen;
    std::vector<std::string> langs;
    std::map<std::string, double> forget;
    std::map<std::string, double> retain;
};

/// Length-normalized sequence probability from a sum of per-token log
/// probabilities: exp(log_prob_sum / token_count).
double norm_probability(double log_prob_sum, int token_count);

ForgettingScores forgetting_scores(const EvalMatrix& matrix, ScoreMode mode,
                                   const std::vector<std::string>& langs);

/// ROC-AUC of forget (positive) vs retain (negative) scores. Computed as the
/// Mann-Whitney rank statistic with half credit for ties, which equals
/// [#(S_f > S_r) + 0.5 * #(S_f = S_r)] / (n_f * n_r) exactly.
double kss_roc(const ForgettingScores& scores);

/// PR-AUC as step-wise average precision over descending unique thresholds,
/// ties grouped into one threshold: AP = sum_n (R_n - R_{n-1}) * P_n.
double kss_pr(const ForgettingScores& scores);

struct ConfusionCounts {
    long long tp = 0;
    long long fn = 0;
    long long fp = 0;
    long long tn = 0;
};

/// Predicts "forgotten" iff S_i >= threshold (inclusive).
ConfusionCounts confusion_counts(const ForgettingScores& scores, double threshold);

/// Eq-6 style pairwise persistence: among forget instances judged forgotten
/// in l1 (SE = 0), the fraction still answered correctly in l2. Empty
/// conditioning set yields nullopt.
std::optional<double> pairwise_persistence(const EvalMatrix& matrix,
                                           const std::string& l1,
                                           const std::string& l2);

enum class KpsCase { Case1HoldOut, Case2TrainMinusBase, Custom };

const char* to_string(KpsCase c);

/// KPS(l1, comparison) with a coverage fraction: the mean runs over defined
/// pairs only, and coverage = defined / total reports how many pairs the
/// mean actually saw.
struct KpsResult {
    std::optional<double> value;
    std::size_t defined_pairs = 0;
    std::size_t total_pairs = 0;

    double coverage() const {
        return total_pairs == 0 ? 0.0
                                : static_cast<double>(defined_pairs) / static_cast<double>(total_pairs);
    }
};

KpsResult kps(const EvalMatrix& matrix, const std::string& l1,
              const std::vector<std::string>& comparison);

/// Case presets: Case 1 compares against the hold-out languages, Case 2
/// against the other training languages.
KpsResult kps_case(const EvalMatrix& matrix, const std::string& l1, KpsCase c);

/// Integer percentage increase relative to a baseline, rounded half away
/// from zero: round((method - baseline) / baseline * 100).
long long relative_increase(double method_value, double baseline_value);

/// One pairwise row per base language plus the aggregate.
struct PersistenceReport {
    std::map<std::pair<std::string, std::string>, std::optional<double>> pairwise;
    std::map<std::string, KpsResult> kps_by_base;
    KpsCase comparison_set_label = KpsCase::Custom;
};

PersistenceReport persistence_report(const EvalMatrix& matrix,
                                     const std::vector<std::string>& base_langs,
                                     KpsCase c);

nlohmann::json kss_result_json(const std::string& metric, ScoreMode mode,
                               const std::string& case_label, double value,
                               const ForgettingScores& scores);
nlohmann::json persistence_report_json(const PersistenceReport& report);

} // namespace mmu
