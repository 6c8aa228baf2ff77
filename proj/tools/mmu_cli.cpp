// Command-line surface for the multilingual unlearning evaluation toolkit.
//
// Exit codes: 0 success, 2 validation error, 3 client/transport failure.

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"

#include "mmu/core.hpp"
#include "mmu/datagen.hpp"
#include "mmu/judges.hpp"
#include "mmu/metrics.hpp"
#include "mmu/report.hpp"
#include "mmu/simulator.hpp"
#include "mmu/unlearn_math.hpp"

namespace {

using nlohmann::json;

void write_output(const std::string& text, const std::string& out_path) {
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path);
    if (!out) {
        throw mmu::ValidationError(mmu::ErrorKind::InvalidConfig,
                                   "cannot write '" + out_path + "'");
    }
    out << text;
}

std::vector<mmu::ScoreMode> modes_from_flag(const std::string& mode) {
    if (mode == "gen") return {mmu::ScoreMode::Gen};
    if (mode == "prob") return {mmu::ScoreMode::Prob};
    if (mode == "both") return {mmu::ScoreMode::Prob, mmu::ScoreMode::Gen};
    throw mmu::ValidationError(mmu::ErrorKind::InvalidConfig,
                               "mode must be gen, prob or both, got '" + mode + "'");
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::stringstream in(text);
    std::string part;
    while (std::getline(in, part, sep)) parts.push_back(part);
    return parts;
}

// "METHOD:RATIO:PATH"
mmu::MethodInput parse_method_input(const std::string& triple) {
    const auto first = triple.find(':');
    const auto second = first == std::string::npos ? std::string::npos
                                                   : triple.find(':', first + 1);
    if (second == std::string::npos) {
        throw mmu::ValidationError(mmu::ErrorKind::InvalidConfig,
                                   "--input expects METHOD:RATIO:PATH, got '" + triple + "'");
    }
    mmu::MethodInput input;
    input.method = triple.substr(0, first);
    input.ratio = triple.substr(first + 1, second - first - 1);
    input.records_path = triple.substr(second + 1);
    return input;
}

// --- subcommand state --------------------------------------------------------

struct SimulateArgs {
    std::string config_path;
    std::string out = "records.jsonl";
    std::string manifest_out = "manifest.json";
    std::string truth_out;
    std::int64_t seed = -1;
};

struct EvaluateArgs {
    std::string input;
    std::string manifest;
    std::string mode = "both";
    std::string case_sel = "both";
    std::string out;
    std::string scores_out;
    std::string histogram_out;
    int histogram_bins = 0;
};

struct KssArgs {
    std::string input;
    std::string baseline;
    std::string manifest;
    std::string method = "method";
    std::string ratio = "p1";
    std::string mode = "both";
    std::string case_sel = "both";
    std::string format = "md";
    std::string out;
};

struct KpsArgs {
    std::string input;
    std::string manifest;
    std::string method = "method";
    std::string ratio = "p1";
    std::string case_sel = "both";
    std::string format = "md";
    std::string out;
};

struct SweepArgs {
    std::string config_path;
    std::string param;
    std::string values;
    std::string format = "csv";
    std::string out;
    std::int64_t seed = -1;
};

struct DatagenArgs {
    std::string pools_path;
    std::string rules_path;
    std::string templates_path;
    std::size_t n = 10;
    std::uint64_t seed = 0;
    std::string langs = "en";
    std::string out = "qa.jsonl";
    std::string skew_out;
    double skew_threshold = 0.5;
    int max_iterations = 5;
    std::string translator_url;
};

struct JudgeArgs {
    std::string pairs_path;
    std::string manifest;
    std::string cache_path;
    std::string out = "records.jsonl";
    std::string translator_url;
    std::string judge_url;
    std::string prompt_path;
    std::string pivot = "en";
    bool no_translate_pivot = false;
    int in_flight = 1;
    int retries = 3;
    double timeout = 30.0;
    std::string auth_env;
};

struct LossesArgs {
    std::string forget_logprobs;
    std::string retain_logprobs;
    std::string retain_dists;
    std::string activations;
    double beta = 0.1;
    double epsilon = 1e-6;
    std::string out;
};

struct ReportArgs {
    std::vector<std::string> inputs;
    std::string manifest;
    std::string baseline_method = "MEM";
    std::string mode = "both";
    std::string case_sel = "both";
    std::string format = "md";
    std::string out;
};

// --- subcommand bodies ----------------------------------------------------------

int run_simulate(const SimulateArgs& args) {
    mmu::ScenarioConfig config = mmu::load_scenario_file(args.config_path);
    if (args.seed >= 0) config.seed = static_cast<std::uint64_t>(args.seed);
    const mmu::Simulation sim = mmu::simulate(config);
    mmu::save_eval_matrix_file(sim.matrix, args.out, args.manifest_out);
    if (!args.truth_out.empty()) {
        std::ofstream truth(args.truth_out);
        if (!truth) {
            throw mmu::ValidationError(mmu::ErrorKind::InvalidConfig,
                                       "cannot write '" + args.truth_out + "'");
        }
        sim.truth.save_jsonl(truth);
    }
    std::cerr << "simulated " << sim.matrix.spec().instance_count() << " instances x "
              << sim.matrix.spec().languages().size() << " languages -> " << args.out << "\n";
    return 0;
}

int run_evaluate(const EvaluateArgs& args) {
    const mmu::EvalMatrix matrix = mmu::load_eval_matrix_file(args.input, args.manifest);
    const auto modes = modes_from_flag(args.mode);
    const mmu::CaseSelection cases = mmu::case_selection_from_string(args.case_sel);

    std::vector<std::pair<std::string, std::vector<std::string>>> subsets;
    if (cases != mmu::CaseSelection::Case2) {
        subsets.emplace_back("case1", matrix.spec().holdout_languages());
    }
    if (cases != mmu::CaseSelection::Case1) {
        subsets.emplace_back("case2", matrix.spec().training_languages());
    }

    json metrics = json::array();
    json scores_dump = json::object();
    std::ostringstream histogram_csv;
    histogram_csv << "mode,case,bin_lo,bin_hi,forget_mass,retain_mass\n";
    for (mmu::ScoreMode mode : modes) {
        for (const auto& [label, langs] : subsets) {
            if (langs.empty()) {
                throw mmu::ValidationError(mmu::ErrorKind::EmptyComparison,
                                           label + " requested but roster lacks that role");
            }
            const mmu::ForgettingScores scores = mmu::forgetting_scores(matrix, mode, langs);
            metrics.push_back(mmu::kss_result_json("kss_roc", mode, label,
                                                   mmu::kss_roc(scores), scores));
            metrics.push_back(mmu::kss_result_json("kss_pr", mode, label,
                                                   mmu::kss_pr(scores), scores));
            if (args.histogram_bins > 0) {
                const mmu::HistogramData hist = mmu::histogram_data(scores, args.histogram_bins);
                metrics.back()["histogram"] = {{"bin_edges", hist.bin_edges},
                                               {"forget_mass", hist.forget_mass},
                                               {"retain_mass", hist.retain_mass}};
                for (std::size_t b = 0; b + 1 < hist.bin_edges.size(); ++b) {
                    histogram_csv << mmu::to_string(mode) << ',' << label << ','
                                  << hist.bin_edges[b] << ',' << hist.bin_edges[b + 1] << ','
                                  << hist.forget_mass[b] << ',' << hist.retain_mass[b] << '\n';
                }
            }
            if (!args.scores_out.empty()) {
                const std::string key = std::string(mmu::to_string(mode)) + "/" + label;
                scores_dump[key] = {{"forget", scores.forget}, {"retain", scores.retain}};
            }
        }
    }
    write_output(json{{"metrics", metrics}}.dump(2) + "\n", args.out);
    if (!args.scores_out.empty()) {
        write_output(scores_dump.dump(2) + "\n", args.scores_out);
    }
    if (!args.histogram_out.empty()) {
        if (args.histogram_bins <= 0) {
            throw mmu::ValidationError(mmu::ErrorKind::InvalidConfig,
                                       "--histogram-out needs --histogram-bins");
        }
        write_output(histogram_csv.str(), args.histogram_out);
    }
    return 0;
}

int run_kss_cmd(const KssArgs& args) {
    mmu::RunConfig config;
    config.manifest = args.manifest;
    config.inputs.push_back({args.method, args.ratio, args.input, ""});
    if (!args.baseline.empty()) {
        config.inputs.push_back({config.baseline_method, args.ratio, args.baseline, ""});
    } else {
        config.baseline_method.clear();
    }
    config.cases = mmu::case_selection_from_string(args.case_sel);
    config.modes = modes_from_flag(args.mode);
    config.format = mmu::output_format_from_string(args.format);
    write_output(mmu::run_kss(config).text, args.out);
    return 0;
}

int run_kps_cmd(const KpsArgs& args) {
    mmu::RunConfig config;
    config.manifest = args.manifest;
    config.baseline_method.clear();
    config.inputs.push_back({args.method, args.ratio, args.input, ""});
    config.cases = mmu::case_selection_from_string(args.case_sel);
    config.format = mmu::output_format_from_string(args.format);
    write_output(mmu::run_kps(config, args.method).text, args.out);
    return 0;
}

int run_sweep(const SweepArgs& args) {
    mmu::ScenarioConfig base = mmu::load_scenario_file(args.config_path);
    if (args.seed >= 0) base.seed = static_cast<std::uint64_t>(args.seed);
    std::vector<double> values;
    for (const auto& token : split(args.values, ',')) {
        if (!token.empty()) values.push_back(std::stod(token));
    }
    const auto rows = mmu::sweep(base, args.param, values);

    const mmu::OutputFormat format = mmu::output_format_from_string(args.format);
    if (format == mmu::OutputFormat::Json) {
        write_output(mmu::sweep_to_json(rows, args.param).dump(2) + "\n", args.out);
        return 0;
    }
    std::ostringstream out;
    const char* header = "param,value,seed,mode,case,kss_roc,kss_pr,kps_case1_avg,kps_case2_avg";
    if (format == mmu::OutputFormat::Markdown) {
        out << "| param | value | mode | case | kss_roc | kss_pr |\n|---|---|---|---|---|---|\n";
        for (const auto& row : rows) {
            for (const auto& entry : row.metrics.kss) {
                out << "| " << args.param << " | " << row.value << " | "
                    << mmu::to_string(entry.mode) << " | " << entry.case_label << " | "
                    << entry.roc << " | " << entry.pr << " |\n";
            }
        }
    } else {
        out << header << "\n";
        for (const auto& row : rows) {
            for (const auto& entry : row.metrics.kss) {
                out << args.param << ',' << row.value << ',' << row.seed << ','
                    << mmu::to_string(entry.mode) << ',' << entry.case_label << ',' << entry.roc
                    << ',' << entry.pr << ',';
                if (row.metrics.kps_case1_avg) out << *row.metrics.kps_case1_avg;
                out << ',';
                if (row.metrics.kps_case2_avg) out << *row.metrics.kps_case2_avg;
                out << '\n';
            }
        }
    }
    write_output(out.str(), args.out);
    return 0;
}

int run_datagen(const DatagenArgs& args) {
    const auto pools = mmu::load_attribute_pools_file(args.pools_path);
    std::vector<mmu::ExclusionRule> rules;
    if (!args.rules_path.empty()) rules = mmu::load_exclusion_rules_file(args.rules_path);
    mmu::TemplateSet templates;
    if (!args.templates_path.empty()) {
        std::ifstream in(args.templates_path);
        if (!in) {
            throw mmu::ValidationError(mmu::ErrorKind::InvalidConfig,
                                       "cannot open templates '" + args.templates_path + "'");
        }
        json j;
        in >> j;
        templates = mmu::templates_from_json(j);
    }

    const auto profiles = mmu::sample_profiles(pools, args.n, args.seed, rules);

    if (!args.skew_out.empty()) {
        const auto skew = mmu::skew_report(profiles, pools, args.skew_threshold);
        json skew_json = json::object();
        for (const auto& [attr, entry] : skew) {
            skew_json[attr] = {{"histogram", entry.histogram},
                               {"normalized_entropy", entry.normalized_entropy},
                               {"flagged", entry.flagged}};
        }
        write_output(skew_json.dump(2) + "\n", args.skew_out);
    }

    std::unique_ptr<mmu::TranslatorClient> translator;
    if (args.translator_url.empty()) {
        translator = std::make_unique<mmu::IdentityTranslator>();
    } else {
        mmu::HttpClientConfig http;
        http.base_url = args.translator_url;
        translator = std::make_unique<mmu::HttpTranslator>(http);
    }
    mmu::NormalizingExactJudge judge;
    mmu::PassthroughRewriter refiner;

    std::vector<mmu::QaPair> emitted;
    std::size_t failed = 0;
    std::map<std::string, int> name_uses;
    const auto targets = split(args.langs, ',');
    for (const auto& profile : profiles) {
        const int use = name_uses[profile.name]++;
        for (const auto& [attribute, value] : profile.attributes) {
            mmu::QaPair pivot_pair = mmu::build_qa(profile, attribute, templates);
            if (use > 0) {
                // repeated names would collide on instance ids
                pivot_pair.instance_id += "~" + std::to_string(use + 1);
            }
            for (const auto& lang : targets) {
                if (lang.empty()) continue;
                if (lang == "en") {
                    emitted.push_back(pivot_pair);
                    continue;
                }
                const mmu::TranslatedPair translated = mmu::translate_pair(
                    pivot_pair, lang, *translator, refiner, judge, args.max_iterations);
                if (translated.verified) {
                    emitted.push_back(translated.pair);
                } else {
                    ++failed;
                }
            }
        }
    }

    std::ofstream out(args.out);
    if (!out) {
        throw mmu::ValidationError(mmu::ErrorKind::InvalidConfig,
                                   "cannot write '" + args.out + "'");
    }
    mmu::save_qa_jsonl(emitted, out);
    std::cerr << "emitted " << emitted.size() << " QA pairs (" << failed
              << " failed verification) -> " << args.out << "\n";
    return 0;
}

int run_judge(const JudgeArgs& args) {
    std::ifstream pairs_in(args.pairs_path);
    if (!pairs_in) {
        throw mmu::ValidationError(mmu::ErrorKind::InvalidConfig,
                                   "cannot open pairs '" + args.pairs_path + "'");
    }
    std::vector<mmu::SePair> pairs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(pairs_in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            pairs.push_back({j.at("instance_id").get<std::string>(),
                             j.at("lang").get<std::string>(),
                             j.at("model_output").get<std::string>(),
                             j.at("ground_truth").get<std::string>()});
        } catch (const json::exception& e) {
            throw mmu::ValidationError(mmu::ErrorKind::MalformedLine,
                                       "line " + std::to_string(line_no) + ": " + e.what());
        }
    }

    const mmu::Manifest manifest = mmu::load_manifest_file(args.manifest);
    if (!manifest.forget_ids) {
        throw mmu::ValidationError(mmu::ErrorKind::InvalidConfig,
                                   "judge needs a manifest with forget_ids/retain_ids");
    }

    std::unique_ptr<mmu::TranslatorClient> translator;
    std::unique_ptr<mmu::JudgeClient> judge;
    mmu::HttpClientConfig http;
    http.max_retries = args.retries;
    http.timeout_seconds = args.timeout;
    http.auth_token_env = args.auth_env;
    if (args.translator_url.empty()) {
        translator = std::make_unique<mmu::IdentityTranslator>();
    } else {
        http.base_url = args.translator_url;
        translator = std::make_unique<mmu::HttpTranslator>(http);
    }
    if (args.judge_url.empty()) {
        judge = std::make_unique<mmu::NormalizingExactJudge>();
    } else {
        http.base_url = args.judge_url;
        mmu::JudgePromptTemplate prompt{
            "", "Candidate answer: {candidate}\nReference answer: {reference}"};
        if (!args.prompt_path.empty()) {
            prompt = mmu::JudgePromptTemplate::load_file(args.prompt_path);
        }
        judge = std::make_unique<mmu::HttpJudge>(http, prompt);
    }

    mmu::JudgeCache cache = args.cache_path.empty()
                                ? mmu::JudgeCache()
                                : mmu::JudgeCache(std::filesystem::path(args.cache_path));
    mmu::BatchSeOptions options;
    options.se.pivot = args.pivot;
    options.se.translate_pivot = !args.no_translate_pivot;
    options.max_in_flight = args.in_flight;

    const mmu::BatchSeResult result = mmu::batch_se(pairs, *translator, *judge, cache, options);

    std::ofstream out(args.out);
    if (!out) {
        throw mmu::ValidationError(mmu::ErrorKind::InvalidConfig,
                                   "cannot write '" + args.out + "'");
    }
    for (const auto& rec : result.records) {
        const bool forget = manifest.forget_ids->count(rec.instance_id) > 0;
        if (!forget && !manifest.retain_ids->count(rec.instance_id)) {
            throw mmu::ValidationError(mmu::ErrorKind::UnknownInstance,
                                       "'" + rec.instance_id + "' not in manifest partition");
        }
        out << json{{"instance_id", rec.instance_id},
                    {"language", rec.language},
                    {"split", forget ? "forget" : "retain"},
                    {"se", *rec.se},
                    {"prob", nullptr},
                    {"token_count", nullptr}}
                   .dump()
            << '\n';
    }
    for (const auto& failure : result.failures) {
        std::cerr << "FAILED (" << failure.instance_id << ", " << failure.lang
                  << "): " << failure.message << "\n";
    }
    std::cerr << result.records.size() << " records, " << result.failures.size()
              << " failures -> " << args.out << "\n";
    return result.failures.empty() ? 0 : 3;
}

int run_losses(const LossesArgs& args) {
    json out = json::object();

    auto load_seqs = [](const std::string& path) {
        std::ifstream in(path);
        if (!in) {
            throw mmu::ValidationError(mmu::ErrorKind::InvalidConfig,
                                       "cannot open '" + path + "'");
        }
        return mmu::load_logprobs_jsonl(in);
    };

    std::vector<mmu::SequenceLogProb> forget;
    if (!args.forget_logprobs.empty()) {
        forget = load_seqs(args.forget_logprobs);
        out["ga"] = mmu::ga_loss(forget);
        json norm = json::array();
        for (const auto& seq : forget) {
            double sum = 0.0;
            for (double lp : seq.logp_current) sum += lp;
            norm.push_back(mmu::norm_probability(sum, static_cast<int>(seq.logp_current.size())));
        }
        out["norm_prob"] = norm;
        bool have_refs = !forget.empty();
        for (const auto& seq : forget) have_refs = have_refs && seq.logp_reference.has_value();
        if (have_refs) {
            out["npo"] = mmu::npo_loss(forget, args.beta);
            out["beta"] = args.beta;
        }
    }
    if (!args.retain_logprobs.empty()) {
        const auto retain = load_seqs(args.retain_logprobs);
        if (forget.empty()) {
            throw mmu::ValidationError(mmu::ErrorKind::EmptyBatch,
                                       "--retain-logprobs needs --forget-logprobs");
        }
        out["gagdr"] = mmu::gagdr_loss(forget, retain);
    }
    if (!args.retain_dists.empty()) {
        std::ifstream in(args.retain_dists);
        if (!in) {
            throw mmu::ValidationError(mmu::ErrorKind::InvalidConfig,
                                       "cannot open '" + args.retain_dists + "'");
        }
        const auto dists = mmu::load_dist_pairs_jsonl(in);
        if (forget.empty()) {
            throw mmu::ValidationError(mmu::ErrorKind::EmptyBatch,
                                       "--retain-dists needs --forget-logprobs");
        }
        out["gaklr"] = mmu::gaklr_loss(forget, dists);
    }
    if (!args.activations.empty()) {
        std::ifstream in(args.activations, std::ios::binary);
        if (!in) {
            throw mmu::ValidationError(mmu::ErrorKind::InvalidConfig,
                                       "cannot open '" + args.activations + "'");
        }
        char magic[8] = {};
        in.read(magic, 8);
        in.clear(); // short files must still rewind cleanly
        in.seekg(0);
        std::vector<mmu::ActivationSample> samples;
        if (std::string(magic, 7) == "MMUACT1") {
            samples = mmu::load_activations_binary(in);
        } else {
            samples = mmu::load_activations_jsonl(in);
        }
        const auto forget_stats = mmu::importance_scores(samples, mmu::DatasetTag::Forget);
        const auto retain_stats = mmu::importance_scores(samples, mmu::DatasetTag::Retain);
        out["importance"] = {
            {"forget",
             {{"std", forget_stats.std_dev},
              {"abs", forget_stats.abs_mean},
              {"freq", forget_stats.pos_freq},
              {"rms", forget_stats.rms}}},
            {"retain",
             {{"std", retain_stats.std_dev},
              {"abs", retain_stats.abs_mean},
              {"freq", retain_stats.pos_freq},
              {"rms", retain_stats.rms}}}};
        out["agnostic"] = mmu::agnostic_importance(forget_stats, retain_stats, args.epsilon);
        out["epsilon"] = args.epsilon;
    }
    if (out.empty()) {
        throw mmu::ValidationError(mmu::ErrorKind::EmptyInput, "no inputs given");
    }
    write_output(out.dump(2) + "\n", args.out);
    return 0;
}

int run_report_cmd(const ReportArgs& args) {
    mmu::RunConfig config;
    config.manifest = args.manifest;
    config.baseline_method = args.baseline_method;
    config.cases = mmu::case_selection_from_string(args.case_sel);
    config.modes = modes_from_flag(args.mode);
    config.format = mmu::output_format_from_string(args.format);
    for (const auto& triple : args.inputs) {
        config.inputs.push_back(parse_method_input(triple));
    }
    write_output(mmu::run_report(config).text, args.out);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multilingual machine-unlearning evaluation toolkit"};
    app.require_subcommand(1);

    SimulateArgs simulate_args;
    auto* sim = app.add_subcommand("simulate", "Generate a synthetic evaluation matrix");
    sim->add_option("--config", simulate_args.config_path, "Scenario config JSON")
        ->required()
        ->check(CLI::ExistingFile);
    sim->add_option("--out", simulate_args.out, "Records JSONL output path");
    sim->add_option("--manifest-out", simulate_args.manifest_out, "Manifest output path");
    sim->add_option("--truth-out", simulate_args.truth_out, "Ground-truth sidecar output path");
    sim->add_option("--seed", simulate_args.seed, "Override the config seed");

    EvaluateArgs evaluate_args;
    auto* eval = app.add_subcommand("evaluate", "Compute the metric suite for a record file");
    eval->add_option("--input", evaluate_args.input, "Records JSONL")->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--manifest", evaluate_args.manifest, "Manifest JSON")->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--mode", evaluate_args.mode, "gen|prob|both");
    eval->add_option("--case", evaluate_args.case_sel, "1|2|both");
    eval->add_option("--out", evaluate_args.out, "Output path (default stdout)");
    eval->add_option("--scores-out", evaluate_args.scores_out, "Per-instance S_i dump path");
    eval->add_option("--histogram-bins", evaluate_args.histogram_bins,
                     "Attach S_i histograms with this many bins");
    eval->add_option("--histogram-out", evaluate_args.histogram_out,
                     "Write the histograms as a tidy CSV to this path");

    KssArgs kss_args;
    auto* kss = app.add_subcommand("kss", "KSS table for one method vs an optional baseline");
    kss->add_option("--input", kss_args.input, "Method records JSONL")->required()
        ->check(CLI::ExistingFile);
    kss->add_option("--baseline", kss_args.baseline, "Baseline records JSONL")
        ->check(CLI::ExistingFile);
    kss->add_option("--manifest", kss_args.manifest, "Manifest JSON")->required()
        ->check(CLI::ExistingFile);
    kss->add_option("--method", kss_args.method, "Method label");
    kss->add_option("--ratio", kss_args.ratio, "Forget-ratio label");
    kss->add_option("--mode", kss_args.mode, "gen|prob|both");
    kss->add_option("--case", kss_args.case_sel, "1|2|both");
    kss->add_option("--format", kss_args.format, "md|csv|json");
    kss->add_option("--out", kss_args.out, "Output path (default stdout)");

    KpsArgs kps_args;
    auto* kps = app.add_subcommand("kps", "Knowledge persistence table for one method");
    kps->add_option("--input", kps_args.input, "Records JSONL")->required()
        ->check(CLI::ExistingFile);
    kps->add_option("--manifest", kps_args.manifest, "Manifest JSON")->required()
        ->check(CLI::ExistingFile);
    kps->add_option("--method", kps_args.method, "Method label");
    kps->add_option("--ratio", kps_args.ratio, "Forget-ratio label");
    kps->add_option("--case", kps_args.case_sel, "1|2|both");
    kps->add_option("--format", kps_args.format, "md|csv|json");
    kps->add_option("--out", kps_args.out, "Output path (default stdout)");

    SweepArgs sweep_args;
    auto* swp = app.add_subcommand("sweep", "Re-simulate while sweeping one scenario parameter");
    swp->add_option("--config", sweep_args.config_path, "Scenario config JSON")->required()
        ->check(CLI::ExistingFile);
    swp->add_option("--param", sweep_args.param, "Parameter to sweep")->required();
    swp->add_option("--values", sweep_args.values, "Comma-separated values")->required();
    swp->add_option("--format", sweep_args.format, "md|csv|json");
    swp->add_option("--out", sweep_args.out, "Output path (default stdout)");
    swp->add_option("--seed", sweep_args.seed, "Override the config seed");

    DatagenArgs datagen_args;
    auto* gen = app.add_subcommand("datagen", "Sample profiles and emit a QA dataset");
    gen->add_option("--pools", datagen_args.pools_path, "Attribute pool JSON")->required()
        ->check(CLI::ExistingFile);
    gen->add_option("--rules", datagen_args.rules_path, "Exclusion rule JSON")
        ->check(CLI::ExistingFile);
    gen->add_option("--templates", datagen_args.templates_path, "QA template JSON")
        ->check(CLI::ExistingFile);
    gen->add_option("--n", datagen_args.n, "Number of profiles");
    gen->add_option("--seed", datagen_args.seed, "Sampling seed");
    gen->add_option("--langs", datagen_args.langs, "Comma-separated target languages");
    gen->add_option("--out", datagen_args.out, "QA JSONL output path");
    gen->add_option("--skew-out", datagen_args.skew_out, "Skew report output path");
    gen->add_option("--skew-threshold", datagen_args.skew_threshold,
                    "Flag attributes below this normalized entropy");
    gen->add_option("--max-iterations", datagen_args.max_iterations,
                    "Verify-refine iteration cap");
    gen->add_option("--translator-url", datagen_args.translator_url,
                    "HTTP translator base URL (default: identity mock)");

    JudgeArgs judge_args;
    auto* jdg = app.add_subcommand("judge", "Run semantic-equivalence judging over QA outputs");
    jdg->add_option("--pairs", judge_args.pairs_path, "Pairs JSONL")->required()
        ->check(CLI::ExistingFile);
    jdg->add_option("--manifest", judge_args.manifest, "Manifest with the id partition")
        ->required()
        ->check(CLI::ExistingFile);
    jdg->add_option("--cache", judge_args.cache_path, "Verdict cache JSONL (append-only)");
    jdg->add_option("--out", judge_args.out, "Records JSONL output path");
    jdg->add_option("--translator-url", judge_args.translator_url,
                    "HTTP translator base URL (default: identity mock)");
    jdg->add_option("--judge-url", judge_args.judge_url,
                    "HTTP judge base URL (default: normalizing exact-match mock)");
    jdg->add_option("--prompt", judge_args.prompt_path, "Judge prompt template JSON");
    jdg->add_option("--pivot", judge_args.pivot, "Pivot language");
    jdg->add_flag("--no-translate-pivot", judge_args.no_translate_pivot,
                  "Skip translating pivot-language texts");
    jdg->add_option("--in-flight", judge_args.in_flight, "Max concurrent client calls");
    jdg->add_option("--retries", judge_args.retries, "HTTP retry count");
    jdg->add_option("--timeout", judge_args.timeout, "HTTP timeout in seconds");
    jdg->add_option("--auth-env", judge_args.auth_env, "Env var holding the bearer token");

    LossesArgs losses_args;
    auto* los = app.add_subcommand("losses", "Evaluate unlearning objectives on log-prob dumps");
    los->add_option("--forget-logprobs", losses_args.forget_logprobs, "Forget-set log-prob JSONL")
        ->check(CLI::ExistingFile);
    los->add_option("--retain-logprobs", losses_args.retain_logprobs, "Retain-set log-prob JSONL")
        ->check(CLI::ExistingFile);
    los->add_option("--retain-dists", losses_args.retain_dists,
                    "Retain-set distribution pair JSONL")
        ->check(CLI::ExistingFile);
    los->add_option("--activations", losses_args.activations,
                    "Activation dump (JSONL or binary columnar)")
        ->check(CLI::ExistingFile);
    los->add_option("--beta", losses_args.beta, "NPO beta");
    los->add_option("--epsilon", losses_args.epsilon, "Pruning importance epsilon");
    los->add_option("--out", losses_args.out, "Output path (default stdout)");

    ReportArgs report_args;
    auto* rep = app.add_subcommand("report", "Full KSS + KPS report across methods and ratios");
    rep->add_option("--input", report_args.inputs, "METHOD:RATIO:PATH (repeatable)")->required();
    rep->add_option("--manifest", report_args.manifest, "Manifest JSON")->required()
        ->check(CLI::ExistingFile);
    rep->add_option("--baseline-method", report_args.baseline_method,
                    "Method label treated as the baseline row");
    rep->add_option("--mode", report_args.mode, "gen|prob|both");
    rep->add_option("--case", report_args.case_sel, "1|2|both");
    rep->add_option("--format", report_args.format, "md|csv|json");
    rep->add_option("--out", report_args.out, "Output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) return run_simulate(simulate_args);
        if (eval->parsed()) return run_evaluate(evaluate_args);
        if (kss->parsed()) return run_kss_cmd(kss_args);
        if (kps->parsed()) return run_kps_cmd(kps_args);
        if (swp->parsed()) return run_sweep(sweep_args);
        if (gen->parsed()) return run_datagen(datagen_args);
        if (jdg->parsed()) return run_judge(judge_args);
        if (los->parsed()) return run_losses(losses_args);
        if (rep->parsed()) return run_report_cmd(report_args);
    } catch (const mmu::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const mmu::TransportError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
