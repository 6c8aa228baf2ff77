#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmu/metrics.hpp"

namespace mmu {

enum class CaseSelection { Case1, Case2, Both };
enum class OutputFormat { Markdown, Csv, Json };

CaseSelection case_selection_from_string(const std::string& s);
OutputFormat output_format_from_string(const std::string& s);

/// One evaluated record file: a method label, a forget-ratio label and the
/// matrix path. The manifest falls back to RunConfig::manifest when empty.
struct MethodInput {
    std::string method;
    std::string ratio = "p1";
    std::string records_path;
    std::string manifest_path;
};

struct RunConfig {
    std::vector<MethodInput> inputs;
    std::string manifest;
    std::string baseline_method = "MEM"; // rows of this method render without subscripts
    CaseSelection cases = CaseSelection::Both;
    std::vector<ScoreMode> modes = {ScoreMode::Prob, ScoreMode::Gen};
    OutputFormat format = OutputFormat::Markdown;
    int histogram_bins = 20;
};

/// In-memory variant of MethodInput for library callers and tests.
struct LoadedInput {
    std::string method;
    std::string ratio;
    EvalMatrix matrix;
};

// --- KSS table ----------------------------------------------------------------

struct KssCell {
    double value = 0.0;
    std::optional<long long> relative; // vs the baseline method; absent on baseline rows
};

struct KssRow {
    std::string method;
    ScoreMode mode;
    // cells indexed parallel to KssTable::columns
    std::vector<KssCell> roc;
    std::vector<KssCell> pr;
};

struct KssTable {
    std::vector<std::string> ratios;      // column-group order
    std::vector<std::string> case_labels; // {"case1","case2"} filtered by selection
    std::vector<std::pair<std::string, std::string>> columns; // (ratio, case)
    std::vector<KssRow> rows;
};

KssTable compute_kss_table(const std::vector<LoadedInput>& inputs,
                           const std::string& baseline_method, CaseSelection cases,
                           const std::vector<ScoreMode>& modes);

// --- KPS table ----------------------------------------------------------------

struct KpsTable {
    std::string method;
    std::vector<std::string> base_langs; // row order
    std::vector<std::pair<std::string, std::string>> columns; // (ratio, case)
    // cells[row][col]; nullopt renders as an em dash
    std::vector<std::vector<KpsResult>> cells;
    std::vector<std::optional<double>> averages; // per column, over defined rows
};

KpsTable compute_kps_table(const std::vector<LoadedInput>& inputs, const std::string& method,
                           CaseSelection cases);

// --- histograms -----------------------------------------------------------------

/// Per-class normalized histograms of S_i over [0, 1]; each class's masses
/// sum to 1. A score of exactly 1 lands in the top bin.
struct HistogramData {
    std::vector<double> bin_edges; // bins + 1 entries
    std::vector<double> forget_mass;
    std::vector<double> retain_mass;
};

HistogramData histogram_data(const ForgettingScores& scores, int bins);

// --- rendering -----------------------------------------------------------------

struct ReportDocument {
    std::string text;    // rendered in the requested format
    nlohmann::json data; // full-precision values
};

std::string format_cell(const KssCell& cell);

ReportDocument render_kss(const KssTable& table, OutputFormat format);
ReportDocument render_kps(const KpsTable& table, OutputFormat format);
ReportDocument render_histogram(const HistogramData& histogram, OutputFormat format);

// --- file-driven entry points -----------------------------------------------------

std::vector<LoadedInput> load_inputs(const RunConfig& config);
ReportDocument run_kss(const RunConfig& config);
ReportDocument run_kps(const RunConfig& config, const std::string& method);
/// Full document: one KSS table plus one KPS table per non-baseline method.
ReportDocument run_report(const RunConfig& config);

} // namespace mmu
