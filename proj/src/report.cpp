#include "mmu/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace mmu {

using nlohmann::json;

CaseSelection case_selection_from_string(const std::string& s) {
    if (s == "1" || s == "case1") return CaseSelection::Case1;
    if (s == "2" || s == "case2") return CaseSelection::Case2;
    if (s == "both") return CaseSelection::Both;
    throw ValidationError(ErrorKind::InvalidConfig, "case must be 1, 2 or both, got '" + s + "'");
}

OutputFormat output_format_from_string(const std::string& s) {
    if (s == "md" || s == "markdown") return OutputFormat::Markdown;
    if (s == "csv") return OutputFormat::Csv;
    if (s == "json") return OutputFormat::Json;
    throw ValidationError(ErrorKind::InvalidConfig, "format must be md, csv or json, got '" + s + "'");
}

namespace {

std::string two_decimals(double value) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.2f", value);
    return buffer;
}

std::vector<std::string> case_labels_for(CaseSelection cases) {
    switch (cases) {
        case CaseSelection::Case1: return {"case1"};
        case CaseSelection::Case2: return {"case2"};
        case CaseSelection::Both:  return {"case1", "case2"};
    }
    return {};
}

std::vector<std::string> langs_for_case(const EvalMatrix& matrix, const std::string& case_label) {
    const auto langs = case_label == "case1" ? matrix.spec().holdout_languages()
                                             : matrix.spec().training_languages();
    if (langs.empty()) {
        throw ValidationError(ErrorKind::EmptyComparison,
                              case_label + " requested but the roster has no " +
                                  (case_label == "case1" ? "hold-out" : "training") +
                                  " languages");
    }
    return langs;
}

std::string case_display(const std::string& case_label) {
    return case_label == "case1" ? "Case 1" : "Case 2";
}

} // namespace

// ---------------------------------------------------------------------------
// KSS table
// ---------------------------------------------------------------------------

KssTable compute_kss_table(const std::vector<LoadedInput>& inputs,
                           const std::string& baseline_method, CaseSelection cases,
                           const std::vector<ScoreMode>& modes) {
    if (inputs.empty()) {
        throw ValidationError(ErrorKind::EmptyInput, "no inputs to report on");
    }

    KssTable table;
    table.case_labels = case_labels_for(cases);
    std::vector<std::string> methods;
    for (const auto& input : inputs) {
        if (std::find(table.ratios.begin(), table.ratios.end(), input.ratio) == table.ratios.end()) {
            table.ratios.push_back(input.ratio);
        }
        if (std::find(methods.begin(), methods.end(), input.method) == methods.end()) {
            methods.push_back(input.method);
        }
    }
    // baseline row leads
    if (auto it = std::find(methods.begin(), methods.end(), baseline_method);
        it != methods.end() && it != methods.begin()) {
        methods.erase(it);
        methods.insert(methods.begin(), baseline_method);
    }
    for (const auto& ratio : table.ratios) {
        for (const auto& case_label : table.case_labels) {
            table.columns.emplace_back(ratio, case_label);
        }
    }

    auto input_for = [&](const std::string& method, const std::string& ratio) -> const LoadedInput* {
        for (const auto& input : inputs) {
            if (input.method == method && input.ratio == ratio) return &input;
        }
        return nullptr;
    };

    const bool have_baseline =
        !baseline_method.empty() &&
        std::find(methods.begin(), methods.end(), baseline_method) != methods.end();

    struct ColumnValues {
        double roc;
        double pr;
    };
    auto compute_column = [&](const LoadedInput& input, ScoreMode mode,
                              const std::string& case_label) -> ColumnValues {
        const ForgettingScores scores =
            forgetting_scores(input.matrix, mode, langs_for_case(input.matrix, case_label));
        return {kss_roc(scores), kss_pr(scores)};
    };

    for (const auto& method : methods) {
        for (ScoreMode mode : modes) {
            KssRow row;
            row.method = method;
            row.mode = mode;
            for (const auto& [ratio, case_label] : table.columns) {
                const LoadedInput* input = input_for(method, ratio);
                if (!input) {
                    throw ValidationError(method == baseline_method ? ErrorKind::MissingBaseline
                                                                    : ErrorKind::InvalidConfig,
                                          "no input for method '" + method + "' at ratio '" +
                                              ratio + "'");
                }
                const ColumnValues values = compute_column(*input, mode, case_label);
                KssCell roc_cell{values.roc, std::nullopt};
                KssCell pr_cell{values.pr, std::nullopt};
                if (have_baseline && method != baseline_method) {
                    const LoadedInput* base = input_for(baseline_method, ratio);
                    if (!base) {
                        throw ValidationError(ErrorKind::MissingBaseline,
                                              "baseline '" + baseline_method +
                                                  "' has no input at ratio '" + ratio + "'");
                    }
                    const ColumnValues base_values = compute_column(*base, mode, case_label);
                    roc_cell.relative = relative_increase(values.roc, base_values.roc);
                    pr_cell.relative = relative_increase(values.pr, base_values.pr);
                }
                row.roc.push_back(roc_cell);
                row.pr.push_back(pr_cell);
            }
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// KPS table
// ---------------------------------------------------------------------------

KpsTable compute_kps_table(const std::vector<LoadedInput>& inputs, const std::string& method,
                           CaseSelection cases) {
    std::vector<const LoadedInput*> selected;
    std::vector<std::string> ratios;
    for (const auto& input : inputs) {
        if (input.method != method) continue;
        selected.push_back(&input);
        if (std::find(ratios.begin(), ratios.end(), input.ratio) == ratios.end()) {
            ratios.push_back(input.ratio);
        }
    }
    if (selected.empty()) {
        throw ValidationError(ErrorKind::InvalidConfig,
                              "no inputs for method '" + method + "'");
    }

    KpsTable table;
    table.method = method;
    table.base_langs = selected.front()->matrix.spec().training_languages();
    std::sort(table.base_langs.begin(), table.base_langs.end());
    if (table.base_langs.empty()) {
        throw ValidationError(ErrorKind::EmptyComparison, "roster has no training languages");
    }

    for (const auto& ratio : ratios) {
        for (const auto& case_label : case_labels_for(cases)) {
            table.columns.emplace_back(ratio, case_label);
        }
    }

    auto matrix_for = [&](const std::string& ratio) -> const EvalMatrix& {
        for (const auto* input : selected) {
            if (input->ratio == ratio) return input->matrix;
        }
        throw ValidationError(ErrorKind::InvalidConfig, "no input at ratio '" + ratio + "'");
    };

    for (const auto& l1 : table.base_langs) {
        std::vector<KpsResult> row;
        for (const auto& [ratio, case_label] : table.columns) {
            const EvalMatrix& matrix = matrix_for(ratio);
            const KpsCase c = case_label == "case1" ? KpsCase::Case1HoldOut
                                                    : KpsCase::Case2TrainMinusBase;
            row.push_back(kps_case(matrix, l1, c));
        }
        table.cells.push_back(std::move(row));
    }

    for (std::size_t col = 0; col < table.columns.size(); ++col) {
        double sum = 0.0;
        std::size_t defined = 0;
        for (const auto& row : table.cells) {
            if (row[col].value) {
                sum += *row[col].value;
                ++defined;
            }
        }
        table.averages.push_back(defined == 0
                                     ? std::nullopt
                                     : std::optional<double>(sum / static_cast<double>(defined)));
    }
    return table;
}

// ---------------------------------------------------------------------------
// histograms
// ---------------------------------------------------------------------------

HistogramData histogram_data(const ForgettingScores& scores, int bins) {
    if (bins < 1) {
        throw ValidationError(ErrorKind::InvalidConfig, "need at least one bin");
    }
    if (scores.forget.empty() || scores.retain.empty()) {
        throw ValidationError(ErrorKind::EmptyClass, "both classes need scores to bin");
    }

    HistogramData out;
    out.bin_edges.resize(bins + 1);
    for (int b = 0; b <= bins; ++b) {
        out.bin_edges[b] = static_cast<double>(b) / static_cast<double>(bins);
    }

    auto binned = [bins](const std::map<std::string, double>& class_scores) {
        std::vector<double> mass(bins, 0.0);
        for (const auto& [id, score] : class_scores) {
            int idx = static_cast<int>(std::floor(score * bins));
            idx = std::clamp(idx, 0, bins - 1); // a score of exactly 1 joins the top bin
            mass[idx] += 1.0;
        }
        const double total = static_cast<double>(class_scores.size());
        for (double& m : mass) m /= total;
        return mass;
    };
    out.forget_mass = binned(scores.forget);
    out.retain_mass = binned(scores.retain);
    return out;
}

// ---------------------------------------------------------------------------
// rendering
// ---------------------------------------------------------------------------

std::string format_cell(const KssCell& cell) {
    std::string out = two_decimals(cell.value);
    if (cell.relative) {
        out += "_{";
        if (*cell.relative >= 0) out += "+";
        out += std::to_string(*cell.relative);
        out += "}";
    }
    return out;
}

ReportDocument render_kss(const KssTable& table, OutputFormat format) {
    ReportDocument doc;

    json rows = json::array();
    for (const auto& row : table.rows) {
        json cells = json::array();
        for (std::size_t col = 0; col < table.columns.size(); ++col) {
            const auto& [ratio, case_label] = table.columns[col];
            for (const auto& [metric, cell] :
                 std::initializer_list<std::pair<const char*, const KssCell*>>{
                     {"kss_roc", &row.roc[col]}, {"kss_pr", &row.pr[col]}}) {
                cells.push_back({{"metric", metric},
                                 {"ratio", ratio},
                                 {"case", case_label},
                                 {"value", cell->value},
                                 {"rendered", format_cell(*cell)},
                                 {"relative",
                                  cell->relative ? json(*cell->relative) : json(nullptr)}});
            }
        }
        rows.push_back({{"method", row.method}, {"mode", to_string(row.mode)}, {"cells", cells}});
    }
    doc.data = json{{"table", "kss"}, {"rows", rows}};

    if (format == OutputFormat::Json) {
        doc.text = doc.data.dump(2) + "\n";
        return doc;
    }

    std::ostringstream out;
    if (format == OutputFormat::Csv) {
        out << "method,mode,metric,ratio,case,value,relative,rendered\n";
        for (const auto& row : table.rows) {
            for (std::size_t col = 0; col < table.columns.size(); ++col) {
                const auto& [ratio, case_label] = table.columns[col];
                for (const auto& [metric, cell] :
                     std::initializer_list<std::pair<const char*, const KssCell*>>{
                         {"kss_roc", &row.roc[col]}, {"kss_pr", &row.pr[col]}}) {
                    out << row.method << ',' << to_string(row.mode) << ',' << metric << ','
                        << ratio << ',' << case_label << ',' << two_decimals(cell->value) << ','
                        << (cell->relative ? std::to_string(*cell->relative) : std::string()) << ','
                        << format_cell(*cell) << '\n';
                }
            }
        }
        doc.text = out.str();
        return doc;
    }

    // markdown, one block per metric
    for (const char* metric : {"kss_roc", "kss_pr"}) {
        const bool roc = std::string(metric) == "kss_roc";
        out << "### " << (roc ? "KSS-ROC" : "KSS-PR") << "\n\n";
        out << "| Method | Type |";
        for (const auto& [ratio, case_label] : table.columns) {
            out << ' ' << ratio << ' ' << case_display(case_label) << " |";
        }
        out << "\n|---|---|";
        for (std::size_t i = 0; i < table.columns.size(); ++i) out << "---|";
        out << "\n";
        for (const auto& row : table.rows) {
            out << "| " << row.method << " | " << (row.mode == ScoreMode::Prob ? "Prob" : "Gen")
                << " |";
            const auto& cells = roc ? row.roc : row.pr;
            for (const auto& cell : cells) {
                out << ' ' << format_cell(cell) << " |";
            }
            out << "\n";
        }
        out << "\n";
    }
    doc.text = out.str();
    return doc;
}

ReportDocument render_kps(const KpsTable& table, OutputFormat format) {
    ReportDocument doc;

    auto cell_text = [](const KpsResult& result) -> std::string {
        if (!result.value) return "—";
        std::string out = two_decimals(*result.value);
        if (result.defined_pairs < result.total_pairs) {
            out += " (" + std::to_string(result.defined_pairs) + "/" +
                   std::to_string(result.total_pairs) + ")";
        }
        return out;
    };

    json rows = json::array();
    for (std::size_t r = 0; r < table.base_langs.size(); ++r) {
        json cells = json::array();
        for (std::size_t col = 0; col < table.columns.size(); ++col) {
            const auto& [ratio, case_label] = table.columns[col];
            const KpsResult& result = table.cells[r][col];
            cells.push_back({{"ratio", ratio},
                             {"case", case_label},
                             {"value", result.value ? json(*result.value) : json(nullptr)},
                             {"rendered", cell_text(result)},
                             {"defined_pairs", result.defined_pairs},
                             {"total_pairs", result.total_pairs},
                             {"coverage", result.coverage()}});
        }
        rows.push_back({{"base_language", table.base_langs[r]}, {"cells", cells}});
    }
    json avg = json::array();
    for (std::size_t col = 0; col < table.columns.size(); ++col) {
        const auto& [ratio, case_label] = table.columns[col];
        avg.push_back({{"ratio", ratio},
                       {"case", case_label},
                       {"value",
                        table.averages[col] ? json(*table.averages[col]) : json(nullptr)}});
    }
    doc.data = json{{"table", "kps"}, {"method", table.method}, {"rows", rows}, {"avg", avg}};

    if (format == OutputFormat::Json) {
        doc.text = doc.data.dump(2) + "\n";
        return doc;
    }

    std::ostringstream out;
    if (format == OutputFormat::Csv) {
        out << "base_language,ratio,case,value,defined_pairs,total_pairs,rendered\n";
        for (std::size_t r = 0; r < table.base_langs.size(); ++r) {
            for (std::size_t col = 0; col < table.columns.size(); ++col) {
                const auto& [ratio, case_label] = table.columns[col];
                const KpsResult& result = table.cells[r][col];
                out << table.base_langs[r] << ',' << ratio << ',' << case_label << ','
                    << (result.value ? two_decimals(*result.value) : std::string()) << ','
                    << result.defined_pairs << ',' << result.total_pairs << ','
                    << "\"" << cell_text(result) << "\"\n";
            }
        }
        for (std::size_t col = 0; col < table.columns.size(); ++col) {
            const auto& [ratio, case_label] = table.columns[col];
            out << "avg," << ratio << ',' << case_label << ','
                << (table.averages[col] ? two_decimals(*table.averages[col]) : std::string())
                << ",,,\n";
        }
        doc.text = out.str();
        return doc;
    }

    out << "### KPS — " << table.method << "\n\n";
    out << "| l1 |";
    for (const auto& [ratio, case_label] : table.columns) {
        out << ' ' << ratio << ' ' << case_display(case_label) << " |";
    }
    out << "\n|---|";
    for (std::size_t i = 0; i < table.columns.size(); ++i) out << "---|";
    out << "\n";
    for (std::size_t r = 0; r < table.base_langs.size(); ++r) {
        out << "| " << table.base_langs[r] << " |";
        for (std::size_t col = 0; col < table.columns.size(); ++col) {
            out << ' ' << cell_text(table.cells[r][col]) << " |";
        }
        out << "\n";
    }
    out << "| **avg** |";
    for (std::size_t col = 0; col < table.columns.size(); ++col) {
        out << ' '
            << (table.averages[col] ? two_decimals(*table.averages[col]) : std::string("—"))
            << " |";
    }
    out << "\n\n";
    doc.text = out.str();
    return doc;
}

ReportDocument render_histogram(const HistogramData& histogram, OutputFormat format) {
    ReportDocument doc;
    doc.data = json{{"table", "histogram"},
                    {"bin_edges", histogram.bin_edges},
                    {"forget_mass", histogram.forget_mass},
                    {"retain_mass", histogram.retain_mass}};
    if (format == OutputFormat::Json) {
        doc.text = doc.data.dump(2) + "\n";
        return doc;
    }
    std::ostringstream out;
    if (format == OutputFormat::Csv) {
        out << "bin_lo,bin_hi,forget_mass,retain_mass\n";
        for (std::size_t b = 0; b + 1 < histogram.bin_edges.size(); ++b) {
            out << histogram.bin_edges[b] << ',' << histogram.bin_edges[b + 1] << ','
                << histogram.forget_mass[b] << ',' << histogram.retain_mass[b] << '\n';
        }
    } else {
        out << "| bin | forget | retain |\n|---|---|---|\n";
        for (std::size_t b = 0; b + 1 < histogram.bin_edges.size(); ++b) {
            out << "| [" << two_decimals(histogram.bin_edges[b]) << ", "
                << two_decimals(histogram.bin_edges[b + 1]) << (b + 2 == histogram.bin_edges.size() ? "]" : ")")
                << " | " << histogram.forget_mass[b] << " | " << histogram.retain_mass[b]
                << " |\n";
        }
    }
    doc.text = out.str();
    return doc;
}

// ---------------------------------------------------------------------------
// file-driven entry points
// ---------------------------------------------------------------------------

std::vector<LoadedInput> load_inputs(const RunConfig& config) {
    if (config.inputs.empty()) {
        throw ValidationError(ErrorKind::EmptyInput, "no --input files given");
    }
    std::vector<LoadedInput> loaded;
    loaded.reserve(config.inputs.size());
    for (const auto& input : config.inputs) {
        const std::string manifest =
            input.manifest_path.empty() ? config.manifest : input.manifest_path;
        if (manifest.empty()) {
            throw ValidationError(ErrorKind::InvalidConfig,
                                  "no manifest for input '" + input.records_path + "'");
        }
        loaded.push_back(
            {input.method, input.ratio, load_eval_matrix_file(input.records_path, manifest)});
    }
    return loaded;
}

ReportDocument run_kss(const RunConfig& config) {
    return render_kss(
        compute_kss_table(load_inputs(config), config.baseline_method, config.cases, config.modes),
        config.format);
}

ReportDocument run_kps(const RunConfig& config, const std::string& method) {
    return render_kps(compute_kps_table(load_inputs(config), method, config.cases), config.format);
}

ReportDocument run_report(const RunConfig& config) {
    const std::vector<LoadedInput> inputs = load_inputs(config);

    std::vector<std::string> methods;
    for (const auto& input : inputs) {
        if (input.method != config.baseline_method &&
            std::find(methods.begin(), methods.end(), input.method) == methods.end()) {
            methods.push_back(input.method);
        }
    }

    ReportDocument kss = render_kss(
        compute_kss_table(inputs, config.baseline_method, config.cases, config.modes),
        config.format);

    ReportDocument doc;
    doc.data = json{{"kss", kss.data}, {"kps", json::object()}};
    std::ostringstream text;
    if (config.format == OutputFormat::Markdown) {
        text << "# Multilingual unlearning report\n\n" << kss.text;
    } else if (config.format == OutputFormat::Csv) {
        text << "# table: kss\n" << kss.text;
    }
    for (const auto& method : methods) {
        ReportDocument kps =
            render_kps(compute_kps_table(inputs, method, config.cases), config.format);
        doc.data["kps"][method] = kps.data;
        if (config.format == OutputFormat::Markdown) {
            text << kps.text;
        } else if (config.format == OutputFormat::Csv) {
            text << "# table: kps " << method << "\n" << kps.text;
        }
    }
    doc.text = config.format == OutputFormat::Json ? doc.data.dump(2) + "\n" : text.str();
    return doc;
}

} // namespace mmu
