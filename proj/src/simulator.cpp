#include "mmu/simulator.hpp"

#include <algorithm>
#include <fstream>

#include "mmu/rng.hpp"

namespace mmu {

using nlohmann::json;

// ---------------------------------------------------------------------------
// config
// ---------------------------------------------------------------------------

void ScenarioConfig::set_uniform_unlearn(double effect) {
    for (const auto& lang : languages) unlearn_effect[lang.code] = effect;
}

void ScenarioConfig::set_training_only_unlearn(double effect) {
    for (const auto& lang : languages) {
        unlearn_effect[lang.code] = lang.role == LanguageRole::Training ? effect : 0.0;
    }
}

void ScenarioConfig::validate() const {
    if (n_forget + n_retain < 2) {
        throw ValidationError(ErrorKind::InvalidConfig, "need at least two instances");
    }
    if (languages.empty()) {
        throw ValidationError(ErrorKind::InvalidConfig, "need at least one language");
    }
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    for (auto [name, v] : std::initializer_list<std::pair<const char*, double>>{
             {"memorization_training", memorization_training},
             {"memorization_holdout", memorization_holdout},
             {"spread_rate", spread_rate},
             {"noise", noise}}) {
        if (!in_unit(v)) {
            throw ValidationError(ErrorKind::InvalidConfig,
                                  std::string(name) + " must be in [0, 1]");
        }
    }
    for (const auto& [code, effect] : unlearn_effect) {
        if (!in_unit(effect)) {
            throw ValidationError(ErrorKind::InvalidConfig,
                                  "unlearn_effect['" + code + "'] must be in [0, 1]");
        }
    }
    if (prob_known_alpha <= 0 || prob_known_beta <= 0 || prob_unknown_alpha <= 0 ||
        prob_unknown_beta <= 0) {
        throw ValidationError(ErrorKind::InvalidConfig, "Beta parameters must be positive");
    }
}

ScenarioConfig scenario_from_json(const json& j) {
    ScenarioConfig config;
    try {
        config.n_forget = j.at("n_forget").get<std::size_t>();
        config.n_retain = j.at("n_retain").get<std::size_t>();
        for (const auto& entry : j.at("languages")) {
            LanguageId lang;
            lang.code = entry.at("code").get<std::string>();
            const std::string role = entry.at("role").get<std::string>();
            lang.role = role == "training" ? LanguageRole::Training : LanguageRole::HoldOut;
            config.languages.push_back(std::move(lang));
        }
        config.memorization_training = j.value("memorization_training", 0.9);
        config.memorization_holdout = j.value("memorization_holdout", 0.0);
        config.spread_rate = j.value("spread_rate", 0.5);
        config.noise = j.value("noise", 0.0);
        config.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("unlearn_effect")) {
            const json& effect = j["unlearn_effect"];
            if (effect.is_number()) {
                config.set_uniform_unlearn(effect.get<double>());
            } else {
                for (const auto& [code, v] : effect.items()) {
                    config.unlearn_effect[code] = v.get<double>();
                }
            }
        }
        if (j.contains("prob_emission")) {
            const json& pe = j["prob_emission"];
            config.prob_known_alpha = pe.value("known_alpha", 9.0);
            config.prob_known_beta = pe.value("known_beta", 1.0);
            config.prob_unknown_alpha = pe.value("unknown_alpha", 1.0);
            config.prob_unknown_beta = pe.value("unknown_beta", 9.0);
        }
    } catch (const json::exception& e) {
        throw ValidationError(ErrorKind::InvalidConfig,
                              std::string("bad scenario config: ") + e.what());
    }
    config.validate();
    return config;
}

json scenario_to_json(const ScenarioConfig& config) {
    json langs = json::array();
    for (const auto& lang : config.languages) {
        langs.push_back({{"code", lang.code},
                         {"role", lang.role == LanguageRole::Training ? "training" : "holdout"}});
    }
    return json{{"n_forget", config.n_forget},
                {"n_retain", config.n_retain},
                {"languages", langs},
                {"memorization_training", config.memorization_training},
                {"memorization_holdout", config.memorization_holdout},
                {"spread_rate", config.spread_rate},
                {"unlearn_effect", config.unlearn_effect},
                {"noise", config.noise},
                {"prob_emission",
                 {{"known_alpha", config.prob_known_alpha},
                  {"known_beta", config.prob_known_beta},
                  {"unknown_alpha", config.prob_unknown_alpha},
                  {"unknown_beta", config.prob_unknown_beta}}},
                {"seed", config.seed}};
}

ScenarioConfig load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError(ErrorKind::InvalidConfig, "cannot open scenario '" + path + "'");
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError(ErrorKind::InvalidConfig,
                              std::string("bad scenario JSON: ") + e.what());
    }
    return scenario_from_json(j);
}

// ---------------------------------------------------------------------------
// generative model
// ---------------------------------------------------------------------------

void GroundTruth::save_jsonl(std::ostream& out) const {
    for (const auto& [key, bits] : cells) {
        out << json{{"instance_id", key.first},
                    {"language", key.second},
                    {"known_before", bits.first},
                    {"known_after", bits.second}}
                   .dump()
            << '\n';
    }
}

namespace {

std::string padded_id(const char* prefix, std::size_t index, std::size_t width) {
    std::string digits = std::to_string(index);
    if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
    return prefix + digits;
}

} // namespace

Simulation simulate(const ScenarioConfig& config) {
    config.validate();
    Rng rng(config.seed);

    const std::size_t width =
        std::to_string(std::max<std::size_t>(1, config.n_forget + config.n_retain - 1)).size();
    std::vector<std::string> forget_ids, retain_ids;
    for (std::size_t i = 0; i < config.n_forget; ++i) {
        forget_ids.push_back(padded_id("f", i, width));
    }
    for (std::size_t i = 0; i < config.n_retain; ++i) {
        retain_ids.push_back(padded_id("r", i, width));
    }

    auto effect_of = [&](const std::string& code) {
        auto it = config.unlearn_effect.find(code);
        return it == config.unlearn_effect.end() ? 0.0 : it->second;
    };

    GroundTruth truth;
    std::vector<EvalRecord> records;
    records.reserve((config.n_forget + config.n_retain) * config.languages.size());

    auto run_instance = [&](const std::string& id, bool in_forget_set) {
        // acquisition: direct memorization in training languages first, then
        // cross-lingual spread into the hold-out languages
        std::map<std::string, bool> known;
        bool any_training = false;
        for (const auto& lang : config.languages) {
            if (lang.role == LanguageRole::Training) {
                known[lang.code] = rng.bernoulli(config.memorization_training);
                any_training = any_training || known[lang.code];
            }
        }
        for (const auto& lang : config.languages) {
            if (lang.role == LanguageRole::HoldOut) {
                const bool direct = rng.bernoulli(config.memorization_holdout);
                const bool spread = rng.bernoulli(config.spread_rate) && any_training;
                known[lang.code] = direct || spread;
            }
        }

        for (const auto& lang : config.languages) {
            const bool before = known[lang.code];
            bool after = before;
            const bool erase_draw = rng.bernoulli(effect_of(lang.code));
            if (in_forget_set && before && erase_draw) after = false;

            const bool flip = rng.bernoulli(config.noise);
            EvalRecord rec;
            rec.instance_id = id;
            rec.language = lang.code;
            rec.se = (after != flip) ? 1 : 0;
            rec.prob = after ? rng.beta(config.prob_known_alpha, config.prob_known_beta)
                             : rng.beta(config.prob_unknown_alpha, config.prob_unknown_beta);
            records.push_back(std::move(rec));
            truth.cells[{id, lang.code}] = {before, after};
        }
    };

    for (const auto& id : forget_ids) run_instance(id, true);
    for (const auto& id : retain_ids) run_instance(id, false);

    DatasetSpec spec(config.languages,
                     std::set<std::string>(forget_ids.begin(), forget_ids.end()),
                     std::set<std::string>(retain_ids.begin(), retain_ids.end()));
    return Simulation{EvalMatrix(std::move(spec), std::move(records)), std::move(truth)};
}

// ---------------------------------------------------------------------------
// metric bundle + sweep
// ---------------------------------------------------------------------------

const MetricBundle::KssEntry& MetricBundle::entry(ScoreMode mode,
                                                  const std::string& case_label) const {
    for (const auto& e : kss) {
        if (e.mode == mode && e.case_label == case_label) return e;
    }
    throw ValidationError(ErrorKind::UnknownParam,
                          "no KSS entry for (" + std::string(to_string(mode)) + ", " + case_label +
                              ")");
}

MetricBundle metric_bundle(const EvalMatrix& matrix) {
    MetricBundle bundle;
    const auto holdout = matrix.spec().holdout_languages();
    const auto training = matrix.spec().training_languages();

    std::vector<std::pair<std::string, std::vector<std::string>>> cases;
    if (!holdout.empty()) cases.emplace_back("case1", holdout);
    if (!training.empty()) cases.emplace_back("case2", training);
    cases.emplace_back("all", matrix.spec().language_codes());

    for (ScoreMode mode : {ScoreMode::Gen, ScoreMode::Prob}) {
        for (const auto& [label, langs] : cases) {
            const ForgettingScores scores = forgetting_scores(matrix, mode, langs);
            bundle.kss.push_back({mode, label, kss_roc(scores), kss_pr(scores)});
        }
    }

    auto average_kps = [&](KpsCase c) -> std::optional<double> {
        double sum = 0.0;
        std::size_t defined = 0;
        for (const auto& l1 : training) {
            const KpsResult result = kps_case(matrix, l1, c);
            if (result.value) {
                sum += *result.value;
                ++defined;
            }
        }
        if (defined == 0) return std::nullopt;
        return sum / static_cast<double>(defined);
    };
    if (!training.empty() && !holdout.empty()) {
        bundle.kps_case1_avg = average_kps(KpsCase::Case1HoldOut);
    }
    if (training.size() >= 2) {
        bundle.kps_case2_avg = average_kps(KpsCase::Case2TrainMinusBase);
    }
    return bundle;
}

std::vector<SweepRow> sweep(const ScenarioConfig& base, const std::string& param,
                            const std::vector<double>& values) {
    auto apply = [&](ScenarioConfig& config, double value) {
        if (param == "unlearn_effect") {
            config.set_uniform_unlearn(value);
        } else if (param == "spread_rate") {
            config.spread_rate = value;
        } else if (param == "noise") {
            config.noise = value;
        } else if (param == "memorization_training") {
            config.memorization_training = value;
        } else if (param == "memorization_holdout") {
            config.memorization_holdout = value;
        } else {
            throw ValidationError(ErrorKind::UnknownParam, "'" + param + "'");
        }
    };

    std::vector<SweepRow> rows;
    rows.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        ScenarioConfig config = base;
        apply(config, values[i]);
        config.seed = base.seed ^ static_cast<std::uint64_t>(i);
        const Simulation sim = simulate(config);
        rows.push_back({values[i], config.seed, metric_bundle(sim.matrix)});
    }
    return rows;
}

json sweep_to_json(const std::vector<SweepRow>& rows, const std::string& param) {
    json out = json::array();
    for (const auto& row : rows) {
        json entries = json::array();
        for (const auto& e : row.metrics.kss) {
            entries.push_back({{"mode", to_string(e.mode)},
                               {"case", e.case_label},
                               {"kss_roc", e.roc},
                               {"kss_pr", e.pr}});
        }
        out.push_back(
            {{"param", param},
             {"value", row.value},
             {"seed", row.seed},
             {"kss", entries},
             {"kps_case1_avg",
              row.metrics.kps_case1_avg ? json(*row.metrics.kps_case1_avg) : json(nullptr)},
             {"kps_case2_avg",
              row.metrics.kps_case2_avg ? json(*row.metrics.kps_case2_avg) : json(nullptr)}});
    }
    return out;
}

} // namespace mmu
