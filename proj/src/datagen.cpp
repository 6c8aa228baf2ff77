#include "mmu/datagen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "mmu/rng.hpp"

namespace mmu {

using nlohmann::json;

// ---------------------------------------------------------------------------
// pools and rules
// ---------------------------------------------------------------------------

bool ExclusionRule::matches(const Profile& profile) const {
    for (const auto& [attr, value] : conditions) {
        if (attr == "name") {
            if (profile.name != value) return false;
            continue;
        }
        auto it = profile.attributes.find(attr);
        if (it == profile.attributes.end() || it->second != value) return false;
    }
    return !conditions.empty();
}

static void validate_pools(const std::vector<AttributePool>& pools) {
    if (pools.empty()) {
        throw ValidationError(ErrorKind::EmptyInput, "no attribute pools");
    }
    std::set<std::string> names;
    for (const auto& pool : pools) {
        if (pool.attribute_name.empty()) {
            throw ValidationError(ErrorKind::InvalidConfig, "attribute pool without a name");
        }
        if (!names.insert(pool.attribute_name).second) {
            throw ValidationError(ErrorKind::InvalidConfig,
                                  "duplicate attribute pool '" + pool.attribute_name + "'");
        }
        if (pool.values.empty()) {
            throw ValidationError(ErrorKind::InvalidConfig,
                                  "pool '" + pool.attribute_name + "' has no values");
        }
        std::set<std::string> values(pool.values.begin(), pool.values.end());
        if (values.size() != pool.values.size()) {
            throw ValidationError(ErrorKind::InvalidConfig,
                                  "pool '" + pool.attribute_name + "' has duplicate values");
        }
    }
}

std::vector<AttributePool> attribute_pools_from_json(const json& j) {
    std::vector<AttributePool> pools;
    const json& entries = j.contains("attributes") ? j["attributes"] : j;
    if (!entries.is_array()) {
        throw ValidationError(ErrorKind::InvalidConfig,
                              "attribute pool file needs an 'attributes' array");
    }
    for (const auto& entry : entries) {
        AttributePool pool;
        pool.attribute_name = entry.at("name").get<std::string>();
        pool.values = entry.at("values").get<std::vector<std::string>>();
        pools.push_back(std::move(pool));
    }
    validate_pools(pools);
    return pools;
}

std::vector<AttributePool> load_attribute_pools_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError(ErrorKind::InvalidConfig, "cannot open pools '" + path + "'");
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError(ErrorKind::InvalidConfig, std::string("bad pools JSON: ") + e.what());
    }
    return attribute_pools_from_json(j);
}

std::vector<ExclusionRule> exclusion_rules_from_json(const json& j) {
    if (!j.is_array()) {
        throw ValidationError(ErrorKind::InvalidConfig, "rules file must be a JSON array");
    }
    std::vector<ExclusionRule> rules;
    for (const auto& entry : j) {
        ExclusionRule rule;
        for (const auto& [attr, value] : entry.items()) {
            rule.conditions[attr] = value.get<std::string>();
        }
        if (rule.conditions.empty()) {
            throw ValidationError(ErrorKind::InvalidConfig, "empty exclusion rule");
        }
        rules.push_back(std::move(rule));
    }
    return rules;
}

std::vector<ExclusionRule> load_exclusion_rules_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError(ErrorKind::InvalidConfig, "cannot open rules '" + path + "'");
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError(ErrorKind::InvalidConfig, std::string("bad rules JSON: ") + e.what());
    }
    return exclusion_rules_from_json(j);
}

// ---------------------------------------------------------------------------
// profile sampling
// ---------------------------------------------------------------------------

std::vector<Profile> sample_profiles(const std::vector<AttributePool>& pools, std::size_t n,
                                     std::uint64_t seed, const std::vector<ExclusionRule>& rules,
                                     int max_retries) {
    validate_pools(pools);
    if (n < 1) {
        throw ValidationError(ErrorKind::InvalidConfig, "need n >= 1 profiles");
    }
    std::set<std::string> pool_names;
    for (const auto& pool : pools) pool_names.insert(pool.attribute_name);
    for (const auto& rule : rules) {
        for (const auto& [attr, value] : rule.conditions) {
            if (!pool_names.count(attr)) {
                throw ValidationError(ErrorKind::UnknownAttribute,
                                      "exclusion rule references '" + attr + "'");
            }
        }
    }

    Rng rng(seed);
    std::vector<Profile> profiles;
    profiles.reserve(n);
    while (profiles.size() < n) {
        int attempts = 0;
        for (;;) {
            Profile profile;
            for (const auto& pool : pools) {
                const std::string& value = pool.values[rng.below(pool.values.size())];
                if (pool.attribute_name == "name") {
                    profile.name = value;
                } else {
                    profile.attributes[pool.attribute_name] = value;
                }
            }
            const bool excluded = std::any_of(rules.begin(), rules.end(),
                                              [&](const ExclusionRule& r) { return r.matches(profile); });
            if (!excluded) {
                profiles.push_back(std::move(profile));
                break;
            }
            if (++attempts > max_retries) {
                throw ValidationError(ErrorKind::ConstraintUnsatisfiable,
                                      "no admissible profile after " + std::to_string(max_retries) +
                                          " resamples");
            }
        }
    }
    return profiles;
}

// ---------------------------------------------------------------------------
// skew diagnostics
// ---------------------------------------------------------------------------

std::map<std::string, AttributeSkew> skew_report(const std::vector<Profile>& profiles,
                                                 const std::vector<AttributePool>& pools,
                                                 double flag_threshold) {
    if (profiles.empty()) {
        throw ValidationError(ErrorKind::EmptyInput, "skew report over zero profiles");
    }
    validate_pools(pools);

    std::map<std::string, AttributeSkew> report;
    for (const auto& pool : pools) {
        AttributeSkew skew;
        for (const auto& profile : profiles) {
            const std::string* value = nullptr;
            if (pool.attribute_name == "name") {
                value = &profile.name;
            } else {
                auto it = profile.attributes.find(pool.attribute_name);
                if (it == profile.attributes.end()) {
                    throw ValidationError(ErrorKind::UnknownAttribute,
                                          "profile lacks attribute '" + pool.attribute_name + "'");
                }
                value = &it->second;
            }
            ++skew.histogram[*value];
        }

        const double total = static_cast<double>(profiles.size());
        double entropy = 0.0;
        for (const auto& [value, count] : skew.histogram) {
            const double p = static_cast<double>(count) / total;
            entropy -= p * std::log(p);
        }
        // A single-value pool cannot be skewed; treat it as fully diverse.
        skew.normalized_entropy =
            pool.values.size() > 1 ? entropy / std::log(static_cast<double>(pool.values.size()))
                                   : 1.0;
        skew.flagged = skew.normalized_entropy < flag_threshold;
        report[pool.attribute_name] = std::move(skew);
    }
    return report;
}

// ---------------------------------------------------------------------------
// QA templating
// ---------------------------------------------------------------------------

const QaTemplate& TemplateSet::for_attribute(const std::string& attribute) const {
    auto it = by_attribute.find(attribute);
    if (it != by_attribute.end()) return it->second;
    return fallback;
}

TemplateSet templates_from_json(const json& j) {
    TemplateSet set;
    if (j.contains("templates")) {
        for (const auto& [attr, entry] : j["templates"].items()) {
            set.by_attribute[attr] = {entry.at("question").get<std::string>(),
                                      entry.at("answer").get<std::string>()};
        }
    }
    if (j.contains("fallback")) {
        set.fallback = {j["fallback"].at("question").get<std::string>(),
                        j["fallback"].at("answer").get<std::string>()};
    }
    return set;
}

namespace {

std::string slugify(const std::string& text) {
    std::string out;
    bool pending_dash = false;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            if (pending_dash && !out.empty()) out.push_back('-');
            pending_dash = false;
            out.push_back(static_cast<char>(std::tolower(c)));
        } else {
            pending_dash = true;
        }
    }
    return out;
}

std::string humanize(const std::string& attribute) {
    std::string out = attribute;
    std::replace(out.begin(), out.end(), '_', ' ');
    return out;
}

std::string fill(std::string text, const std::string& name, const std::string& attribute,
                 const std::string& value) {
    auto replace_all = [&text](const std::string& slot, const std::string& v) {
        std::size_t pos = 0;
        while ((pos = text.find(slot, pos)) != std::string::npos) {
            text.replace(pos, slot.size(), v);
            pos += v.size();
        }
    };
    replace_all("{name}", name);
    replace_all("{attribute}", attribute);
    replace_all("{value}", value);
    return text;
}

} // namespace

QaPair build_qa(const Profile& profile, const std::string& attribute,
                const TemplateSet& templates) {
    auto it = profile.attributes.find(attribute);
    if (it == profile.attributes.end()) {
        throw ValidationError(ErrorKind::UnknownAttribute,
                              "profile has no attribute '" + attribute + "'");
    }
    const QaTemplate& tmpl = templates.for_attribute(attribute);
    if (tmpl.question.empty()) {
        throw ValidationError(ErrorKind::MissingTemplate, "empty template for '" + attribute + "'");
    }

    QaPair pair;
    pair.instance_id = slugify(profile.name) + "." + attribute;
    pair.question = fill(tmpl.question, profile.name, humanize(attribute), it->second);
    pair.answer = fill(tmpl.answer, profile.name, humanize(attribute), it->second);
    pair.language = "en";
    pair.attribute = attribute;
    pair.subject_name = profile.name;
    if (pair.question.find(profile.name) == std::string::npos) {
        throw ValidationError(ErrorKind::NameLost,
                              "question template for '" + attribute + "' drops the subject name");
    }
    return pair;
}

// ---------------------------------------------------------------------------
// verify-and-refine
// ---------------------------------------------------------------------------

RefineState verify_refine(const QaPair& pair, const std::string& target_lang,
                          TranslatorClient& translator, RewriteClient& refiner,
                          JudgeClient& judge, int max_iterations, QaField field,
                          const std::string& pivot) {
    if (target_lang == pivot) {
        throw ValidationError(ErrorKind::InvalidConfig,
                              "target language equals the pivot '" + pivot + "'");
    }
    if (max_iterations < 1) {
        throw ValidationError(ErrorKind::InvalidConfig, "max_iterations must be >= 1");
    }

    RefineState state;
    state.source = pair;
    state.field = field;
    const std::string& source_text = field == QaField::Question ? pair.question : pair.answer;
    const bool carries_name = source_text.find(pair.subject_name) != std::string::npos;
    auto check_name = [&](const std::string& text, const char* stage) {
        if (carries_name && text.find(pair.subject_name) == std::string::npos) {
            throw ValidationError(ErrorKind::NameLost,
                                  std::string(stage) + " dropped '" + pair.subject_name +
                                      "' for instance " + pair.instance_id);
        }
    };

    std::string candidate = translator.translate(source_text, pivot, target_lang);
    check_name(candidate, "translation");

    for (int iter = 1; iter <= max_iterations; ++iter) {
        state.iterations = iter;
        state.candidate_translation = candidate;
        state.back_translation = translator.translate(candidate, target_lang, pivot);
        check_name(state.back_translation, "back-translation");
        if (judge.equivalent(state.back_translation, source_text) == 1) {
            state.status = RefineStatus::Verified;
            return state;
        }
        if (iter < max_iterations) {
            candidate = refiner.refine(source_text, candidate, target_lang);
            check_name(candidate, "refinement");
        }
    }
    state.status = RefineStatus::Failed;
    return state;
}

TranslatedPair translate_pair(const QaPair& pair, const std::string& target_lang,
                              TranslatorClient& translator, RewriteClient& refiner,
                              JudgeClient& judge, int max_iterations, const std::string& pivot) {
    TranslatedPair out;
    out.question_state = verify_refine(pair, target_lang, translator, refiner, judge,
                                       max_iterations, QaField::Question, pivot);
    out.answer_state = verify_refine(pair, target_lang, translator, refiner, judge,
                                     max_iterations, QaField::Answer, pivot);
    out.verified = out.question_state.status == RefineStatus::Verified &&
                   out.answer_state.status == RefineStatus::Verified;
    out.pair = pair;
    out.pair.language = target_lang;
    out.pair.question = out.question_state.candidate_translation;
    out.pair.answer = out.answer_state.candidate_translation;
    return out;
}

// ---------------------------------------------------------------------------
// QA pair I/O
// ---------------------------------------------------------------------------

void save_qa_jsonl(const std::vector<QaPair>& pairs, std::ostream& out) {
    for (const auto& pair : pairs) {
        out << json{{"instance_id", pair.instance_id}, {"question", pair.question},
                    {"answer", pair.answer},           {"language", pair.language},
                    {"attribute", pair.attribute},     {"subject_name", pair.subject_name}}
                   .dump()
            << '\n';
    }
}

std::vector<QaPair> load_qa_jsonl(std::istream& in) {
    std::vector<QaPair> pairs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
            QaPair pair;
            pair.instance_id = j.at("instance_id").get<std::string>();
            pair.question = j.at("question").get<std::string>();
            pair.answer = j.at("answer").get<std::string>();
            pair.language = j.at("language").get<std::string>();
            pair.attribute = j.at("attribute").get<std::string>();
            pair.subject_name = j.at("subject_name").get<std::string>();
            pairs.push_back(std::move(pair));
        } catch (const json::exception& e) {
            throw ValidationError(ErrorKind::MalformedLine,
                                  "line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return pairs;
}

} // namespace mmu
