#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "mmu/report.hpp"
#include "mmu/simulator.hpp"
#include "test_support.hpp"

using namespace mmu;

namespace {

ScenarioConfig roster_config(std::uint64_t seed, double unlearn) {
    ScenarioConfig config;
    config.n_forget = 10;
    config.n_retain = 40;
    config.languages = {{"bn", LanguageRole::Training}, {"de", LanguageRole::Training},
                        {"en", LanguageRole::Training}, {"he", LanguageRole::Training},
                        {"ru", LanguageRole::Training}, {"sq", LanguageRole::Training},
                        {"ta", LanguageRole::Training}, {"zh", LanguageRole::Training},
                        {"af", LanguageRole::HoldOut},  {"es", LanguageRole::HoldOut}};
    config.memorization_training = 0.9;
    config.spread_rate = 0.6;
    config.seed = seed;
    config.set_uniform_unlearn(unlearn);
    return config;
}

std::vector<LoadedInput> method_and_baseline_inputs() {
    std::vector<LoadedInput> inputs;
    inputs.push_back({"NPO", "p1", simulate(roster_config(11, 0.8)).matrix});
    inputs.push_back({"MEM", "p1", simulate(roster_config(12, 0.0)).matrix});
    return inputs;
}

} // namespace

TEST_CASE("format_cell renders the subscript notation") {
    CHECK(format_cell({0.57, 10}) == "0.57_{+10}");
    CHECK(format_cell({0.52, 0}) == "0.52_{+0}");
    CHECK(format_cell({0.88, 8700}) == "0.88_{+8700}");
    CHECK(format_cell({0.45, -13}) == "0.45_{-13}");
    CHECK(format_cell({0.52, std::nullopt}) == "0.52"); // baseline rows stay bare
}

TEST_CASE("compute_kss_table lays out methods x modes x (ratio, case)") {
    const auto inputs = method_and_baseline_inputs();
    const KssTable table = compute_kss_table(inputs, "MEM", CaseSelection::Both,
                                             {ScoreMode::Prob, ScoreMode::Gen});

    CHECK(table.columns.size() == 2); // one ratio, two cases
    REQUIRE(table.rows.size() == 4); // two methods x two modes
    CHECK(table.rows[0].method == "MEM"); // baseline row leads
    for (const auto& cell : table.rows[0].roc) CHECK_FALSE(cell.relative.has_value());

    const KssRow* npo_prob = nullptr;
    for (const auto& row : table.rows) {
        if (row.method == "NPO" && row.mode == ScoreMode::Prob) npo_prob = &row;
    }
    REQUIRE(npo_prob != nullptr);

    // the subscript reproduces relative_increase against the recomputed baseline
    for (std::size_t col = 0; col < table.columns.size(); ++col) {
        const auto& [ratio, case_label] = table.columns[col];
        const auto langs = case_label == "case1" ? inputs[0].matrix.spec().holdout_languages()
                                                 : inputs[0].matrix.spec().training_languages();
        const double method_roc =
            kss_roc(forgetting_scores(inputs[0].matrix, ScoreMode::Prob, langs));
        const double baseline_roc =
            kss_roc(forgetting_scores(inputs[1].matrix, ScoreMode::Prob, langs));
        CHECK(npo_prob->roc[col].value == method_roc);
        REQUIRE(npo_prob->roc[col].relative.has_value());
        CHECK(*npo_prob->roc[col].relative == relative_increase(method_roc, baseline_roc));
    }
}

TEST_CASE("compute_kss_table surfaces a zero baseline as ZeroBaseline") {
    // baseline with forget scores all 0 and retain all 1 drives ROC-AUC to 0
    support::MatrixBuilder method, baseline;
    for (auto* builder : {&method, &baseline}) {
        builder->language("en").language("af", LanguageRole::HoldOut);
    }
    for (const std::string lang : {"en", "af"}) {
        method.cell("f0", lang, true, 0);
        method.cell("r0", lang, false, 1);
        baseline.cell("f0", lang, true, 1);  // S_f = 0
        baseline.cell("r0", lang, false, 0); // S_r = 1
    }
    const std::vector<LoadedInput> inputs = {{"GA", "p1", method.build()},
                                             {"MEM", "p1", baseline.build()}};
    CHECK_VALIDATION_KIND(
        compute_kss_table(inputs, "MEM", CaseSelection::Case2, {ScoreMode::Gen}),
        ErrorKind::ZeroBaseline);
}

TEST_CASE("compute_kss_table requires a baseline input per ratio") {
    std::vector<LoadedInput> inputs;
    inputs.push_back({"NPO", "p1", simulate(roster_config(1, 0.5)).matrix});
    inputs.push_back({"NPO", "p3", simulate(roster_config(2, 0.5)).matrix});
    inputs.push_back({"MEM", "p1", simulate(roster_config(3, 0.0)).matrix});
    CHECK_VALIDATION_KIND(
        compute_kss_table(inputs, "MEM", CaseSelection::Both, {ScoreMode::Gen}),
        ErrorKind::MissingBaseline);
}

TEST_CASE("kps table lays out base languages by ratio and case") {
    // 8 training languages, 2 cases, 3 ratios -> 8 rows + avg, 6 value columns
    std::vector<LoadedInput> inputs;
    inputs.push_back({"NPO", "p1", simulate(roster_config(21, 0.9)).matrix});
    inputs.push_back({"NPO", "p3", simulate(roster_config(22, 0.6)).matrix});
    inputs.push_back({"NPO", "p5", simulate(roster_config(23, 0.3)).matrix});

    const KpsTable table = compute_kps_table(inputs, "NPO", CaseSelection::Both);
    CHECK(table.base_langs.size() == 8);
    CHECK(std::is_sorted(table.base_langs.begin(), table.base_langs.end()));
    CHECK(table.columns.size() == 6);
    CHECK(table.cells.size() == 8);
    CHECK(table.averages.size() == 6);

    const ReportDocument md = render_kps(table, OutputFormat::Markdown);
    CHECK(md.text.find("| **avg** |") != std::string::npos);
    // 8 language rows + header + separator + avg
    std::size_t rows = 0;
    std::istringstream lines(md.text);
    std::string line;
    while (std::getline(lines, line)) {
        if (!line.empty() && line.front() == '|') ++rows;
    }
    CHECK(rows == 11);
}

TEST_CASE("kps rows with an empty conditioning set render as dashes") {
    // base language 'en' has SE=1 for all forget rows: nothing judged forgotten
    support::MatrixBuilder builder;
    builder.language("en").language("de").language("af", LanguageRole::HoldOut);
    for (const std::string id : {"f0", "f1"}) {
        builder.cell(id, "en", true, 1);
        builder.cell(id, "de", true, 0);
        builder.cell(id, "af", true, 1);
    }
    builder.cell("r0", "en", false, 1).cell("r0", "de", false, 1).cell("r0", "af", false, 1);
    const std::vector<LoadedInput> inputs = {{"GA", "p1", builder.build()}};

    const KpsTable table = compute_kps_table(inputs, "GA", CaseSelection::Case1);
    REQUIRE(table.base_langs == std::vector<std::string>{"de", "en"});
    CHECK_FALSE(table.cells[1][0].value.has_value()); // en row undefined
    CHECK(table.cells[0][0].value.has_value());       // de row defined
    // the average skips the undefined row instead of zeroing it
    CHECK(*table.averages[0] == *table.cells[0][0].value);

    const ReportDocument md = render_kps(table, OutputFormat::Markdown);
    CHECK(md.text.find("—") != std::string::npos);
}

TEST_CASE("a single training pair echoes the lone pairwise value") {
    support::MatrixBuilder builder;
    builder.language("l1").language("l2");
    builder.cell("f0", "l1", true, 0).cell("f0", "l2", true, 1);
    builder.cell("r0", "l1", false, 1).cell("r0", "l2", false, 1);
    const std::vector<LoadedInput> inputs = {{"GA", "p1", builder.build()}};
    const KpsTable table = compute_kps_table(inputs, "GA", CaseSelection::Case2);
    CHECK(table.columns.size() == 1);
    CHECK(*table.cells[0][0].value == 1.0); // base l1, comparison {l2}
    CHECK(table.cells[0][0].total_pairs == 1);
    CHECK_FALSE(table.cells[1][0].value.has_value()); // nothing forgotten in l2
}

TEST_CASE("histogram_data normalizes per class") {
    SUBCASE("all mass in the top bin") {
        const auto scores = support::make_scores({1.0, 1.0, 1.0}, {1.0});
        const HistogramData hist = histogram_data(scores, 10);
        CHECK(hist.forget_mass[9] == 1.0);
        CHECK(hist.retain_mass[9] == 1.0);
        for (int b = 0; b < 9; ++b) CHECK(hist.forget_mass[b] == 0.0);
    }
    SUBCASE("masses sum to one per class") {
        const auto scores =
            support::make_scores({0.1, 0.4, 0.9, 0.3}, {0.2, 0.6, 0.6, 0.8, 1.0});
        const HistogramData hist = histogram_data(scores, 7);
        double forget_total = 0.0, retain_total = 0.0;
        for (double m : hist.forget_mass) forget_total += m;
        for (double m : hist.retain_mass) retain_total += m;
        CHECK(forget_total == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(retain_total == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("separated classes land in separate bins") {
        const auto scores = support::make_scores({0.9, 0.8}, {0.1, 0.2});
        const HistogramData hist = histogram_data(scores, 2);
        CHECK(hist.forget_mass == std::vector<double>{0.0, 1.0});
        CHECK(hist.retain_mass == std::vector<double>{1.0, 0.0});
    }
    SUBCASE("errors") {
        CHECK_VALIDATION_KIND(histogram_data(support::make_scores({}, {0.5}), 4),
                              ErrorKind::EmptyClass);
        CHECK_VALIDATION_KIND(histogram_data(support::make_scores({0.5}, {0.5}), 0),
                              ErrorKind::InvalidConfig);
    }
}

TEST_CASE("rendering is deterministic and formats agree on the numbers") {
    const auto inputs = method_and_baseline_inputs();
    const KssTable table = compute_kss_table(inputs, "MEM", CaseSelection::Both,
                                             {ScoreMode::Prob, ScoreMode::Gen});

    const ReportDocument md_a = render_kss(table, OutputFormat::Markdown);
    const ReportDocument md_b = render_kss(table, OutputFormat::Markdown);
    CHECK(md_a.text == md_b.text); // byte-identical across runs

    const ReportDocument csv = render_kss(table, OutputFormat::Csv);
    const ReportDocument json_doc = render_kss(table, OutputFormat::Json);

    // every rendered value in the JSON appears verbatim in the CSV and markdown
    for (const auto& row : json_doc.data["rows"]) {
        for (const auto& cell : row["cells"]) {
            const std::string rendered = cell["rendered"].get<std::string>();
            CHECK(csv.text.find("," + rendered + "\n") != std::string::npos);
            CHECK(md_a.text.find(" " + rendered + " ") != std::string::npos);
        }
    }
    CHECK(json_doc.text.find("\"value\"") != std::string::npos); // raw values stay available
}
