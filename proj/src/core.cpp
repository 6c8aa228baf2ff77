#include "mmu/core.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace mmu {

using nlohmann::json;

// ---------------------------------------------------------------------------
// DatasetSpec
// ---------------------------------------------------------------------------

static bool is_lower_token(const std::string& s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::islower(c) || std::isdigit(c) || c == '-' || c == '_';
    });
}

DatasetSpec::DatasetSpec(std::vector<LanguageId> languages,
                         std::set<std::string> forget_ids,
                         std::set<std::string> retain_ids)
    : languages_(std::move(languages)),
      forget_ids_(std::move(forget_ids)),
      retain_ids_(std::move(retain_ids)) {
    if (languages_.empty()) {
        throw ValidationError(ErrorKind::InvalidConfig, "language roster is empty");
    }
    std::set<std::string> seen;
    for (const auto& lang : languages_) {
        if (!is_lower_token(lang.code)) {
            throw ValidationError(ErrorKind::InvalidConfig,
                                  "language code must be non-empty lowercase: '" + lang.code + "'");
        }
        if (!seen.insert(lang.code).second) {
            throw ValidationError(ErrorKind::InvalidConfig,
                                  "duplicate language code '" + lang.code + "'");
        }
    }
    for (const auto& id : forget_ids_) {
        if (retain_ids_.count(id)) {
            throw ValidationError(ErrorKind::InvalidConfig,
                                  "instance '" + id + "' is in both forget and retain sets");
        }
    }
}

std::vector<std::string> DatasetSpec::language_codes() const {
    std::vector<std::string> codes;
    codes.reserve(languages_.size());
    for (const auto& lang : languages_) codes.push_back(lang.code);
    return codes;
}

std::vector<std::string> DatasetSpec::codes_with_role(LanguageRole role) const {
    std::vector<std::string> codes;
    for (const auto& lang : languages_) {
        if (lang.role == role) codes.push_back(lang.code);
    }
    return codes;
}

std::vector<std::string> DatasetSpec::training_languages() const {
    return codes_with_role(LanguageRole::Training);
}

std::vector<std::string> DatasetSpec::holdout_languages() const {
    return codes_with_role(LanguageRole::HoldOut);
}

bool DatasetSpec::has_language(const std::string& code) const {
    return std::any_of(languages_.begin(), languages_.end(),
                       [&](const LanguageId& l) { return l.code == code; });
}

LanguageRole DatasetSpec::role_of(const std::string& code) const {
    for (const auto& lang : languages_) {
        if (lang.code == code) return lang.role;
    }
    throw ValidationError(ErrorKind::UnknownLanguage, "'" + code + "' not in roster");
}

bool DatasetSpec::has_instance(const std::string& id) const {
    return forget_ids_.count(id) || retain_ids_.count(id);
}

bool DatasetSpec::is_forget(const std::string& id) const {
    if (forget_ids_.count(id)) return true;
    if (retain_ids_.count(id)) return false;
    throw ValidationError(ErrorKind::UnknownInstance, "'" + id + "' not in dataset");
}

std::vector<std::string> DatasetSpec::all_ids() const {
    std::vector<std::string> ids(forget_ids_.begin(), forget_ids_.end());
    ids.insert(ids.end(), retain_ids_.begin(), retain_ids_.end());
    std::sort(ids.begin(), ids.end());
    return ids;
}

// ---------------------------------------------------------------------------
// EvalMatrix
// ---------------------------------------------------------------------------

static void validate_record(const EvalRecord& rec) {
    if (rec.se && *rec.se != 0 && *rec.se != 1) {
        throw ValidationError(ErrorKind::MalformedLine,
                              "se must be 0 or 1 for (" + rec.instance_id + ", " + rec.language + ")");
    }
    if (rec.prob && (*rec.prob < 0.0 || *rec.prob > 1.0)) {
        throw ValidationError(ErrorKind::ProbOutOfRange,
                              "prob=" + std::to_string(*rec.prob) + " for (" + rec.instance_id +
                                  ", " + rec.language + ")");
    }
    if (rec.token_count && *rec.token_count < 1) {
        throw ValidationError(ErrorKind::MalformedLine,
                              "token_count must be >= 1 for (" + rec.instance_id + ", " +
                                  rec.language + ")");
    }
}

EvalMatrix::EvalMatrix(DatasetSpec spec, std::vector<EvalRecord> records)
    : spec_(std::move(spec)) {
    for (auto& rec : records) {
        if (!spec_.has_language(rec.language)) {
            throw ValidationError(ErrorKind::UnknownLanguage,
                                  "'" + rec.language + "' in record for '" + rec.instance_id + "'");
        }
        if (!spec_.has_instance(rec.instance_id)) {
            throw ValidationError(ErrorKind::UnknownInstance,
                                  "'" + rec.instance_id + "' not in forget/retain partition");
        }
        validate_record(rec);
        CellKey key{rec.instance_id, rec.language};
        if (!cells_.emplace(key, std::move(rec)).second) {
            throw ValidationError(ErrorKind::DuplicateCell,
                                  "(" + key.first + ", " + key.second + ")");
        }
    }
}

const EvalRecord& EvalMatrix::at(const std::string& instance_id,
                                 const std::string& language) const {
    auto it = cells_.find({instance_id, language});
    if (it == cells_.end()) {
        throw ValidationError(ErrorKind::MissingCell,
                              "(" + instance_id + ", " + language + ")");
    }
    return it->second;
}

const EvalRecord* EvalMatrix::find(const std::string& instance_id,
                                   const std::string& language) const {
    auto it = cells_.find({instance_id, language});
    return it == cells_.end() ? nullptr : &it->second;
}

EvalMatrix EvalMatrix::sliced(const std::vector<std::string>& langs,
                              const std::vector<std::string>& ids) const {
    std::vector<LanguageId> kept_langs;
    for (const auto& code : langs) {
        if (!spec_.has_language(code)) {
            throw ValidationError(ErrorKind::UnknownLanguage, "'" + code + "' not in roster");
        }
    }
    // preserve the spec's language order regardless of the subset order
    for (const auto& lang : spec_.languages()) {
        if (std::find(langs.begin(), langs.end(), lang.code) != langs.end()) {
            kept_langs.push_back(lang);
        }
    }

    std::set<std::string> forget, retain;
    for (const auto& id : ids) {
        if (spec_.is_forget(id)) {
            forget.insert(id);
        } else {
            retain.insert(id);
        }
    }

    std::vector<EvalRecord> records;
    records.reserve(kept_langs.size() * ids.size());
    for (const auto& id : ids) {
        for (const auto& lang : kept_langs) {
            records.push_back(at(id, lang.code));
        }
    }
    return EvalMatrix(DatasetSpec(std::move(kept_langs), std::move(forget), std::move(retain)),
                      std::move(records));
}

EvalMatrix EvalMatrix::sliced_languages(const std::vector<std::string>& langs) const {
    return sliced(langs, spec_.all_ids());
}

// ---------------------------------------------------------------------------
// Manifest and JSONL I/O
// ---------------------------------------------------------------------------

Manifest manifest_from_json(const json& j) {
    Manifest m;
    if (!j.contains("languages") || !j["languages"].is_array()) {
        throw ValidationError(ErrorKind::InvalidConfig, "manifest needs a 'languages' array");
    }
    for (const auto& entry : j["languages"]) {
        LanguageId lang;
        lang.code = entry.at("code").get<std::string>();
        const std::string role = entry.at("role").get<std::string>();
        if (role == "training") {
            lang.role = LanguageRole::Training;
        } else if (role == "holdout" || role == "hold-out") {
            lang.role = LanguageRole::HoldOut;
        } else {
            throw ValidationError(ErrorKind::InvalidConfig,
                                  "language role must be 'training' or 'holdout', got '" + role + "'");
        }
        m.languages.push_back(std::move(lang));
    }
    auto read_ids = [&](const char* key) -> std::optional<std::set<std::string>> {
        if (!j.contains(key)) return std::nullopt;
        std::set<std::string> ids;
        for (const auto& id : j.at(key)) ids.insert(id.get<std::string>());
        return ids;
    };
    m.forget_ids = read_ids("forget_ids");
    m.retain_ids = read_ids("retain_ids");
    if (m.forget_ids.has_value() != m.retain_ids.has_value()) {
        throw ValidationError(ErrorKind::InvalidConfig,
                              "manifest must declare both forget_ids and retain_ids or neither");
    }
    return m;
}

nlohmann::json manifest_to_json(const DatasetSpec& spec) {
    json langs = json::array();
    for (const auto& lang : spec.languages()) {
        langs.push_back({{"code", lang.code},
                         {"role", lang.role == LanguageRole::Training ? "training" : "holdout"}});
    }
    return json{{"languages", langs},
                {"forget_ids", spec.forget_ids()},
                {"retain_ids", spec.retain_ids()}};
}

Manifest load_manifest(std::istream& in) {
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError(ErrorKind::InvalidConfig, std::string("bad manifest JSON: ") + e.what());
    }
    return manifest_from_json(j);
}

Manifest load_manifest_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError(ErrorKind::InvalidConfig, "cannot open manifest '" + path + "'");
    }
    return load_manifest(in);
}

namespace {

struct ParsedLine {
    EvalRecord record;
    bool forget = false;
};

ParsedLine parse_record_line(const std::string& line, std::size_t line_no) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw ValidationError(ErrorKind::MalformedLine,
                              "line " + std::to_string(line_no) + ": " + e.what());
    }
    ParsedLine out;
    try {
        out.record.instance_id = j.at("instance_id").get<std::string>();
        out.record.language = j.at("language").get<std::string>();
        const std::string split = j.at("split").get<std::string>();
        if (split == "forget") {
            out.forget = true;
        } else if (split == "retain") {
            out.forget = false;
        } else {
            throw ValidationError(ErrorKind::MalformedLine,
                                  "line " + std::to_string(line_no) +
                                      ": split must be 'forget' or 'retain'");
        }
        if (j.contains("se") && !j["se"].is_null()) out.record.se = j["se"].get<int>();
        if (j.contains("prob") && !j["prob"].is_null()) out.record.prob = j["prob"].get<double>();
        if (j.contains("token_count") && !j["token_count"].is_null()) {
            out.record.token_count = j["token_count"].get<int>();
        }
    } catch (const json::exception& e) {
        throw ValidationError(ErrorKind::MalformedLine,
                              "line " + std::to_string(line_no) + ": " + e.what());
    }
    return out;
}

} // namespace

EvalMatrix load_eval_matrix(std::istream& jsonl, const Manifest& manifest) {
    std::set<std::string> lang_codes;
    for (const auto& lang : manifest.languages) lang_codes.insert(lang.code);

    std::vector<EvalRecord> records;
    std::map<std::string, bool> split_of; // instance -> forget?
    std::set<CellKey> seen;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(jsonl, line)) {
        ++line_no;
        if (line.empty()) continue;
        ParsedLine parsed = parse_record_line(line, line_no);
        EvalRecord& rec = parsed.record;

        if (!lang_codes.count(rec.language)) {
            throw ValidationError(ErrorKind::UnknownLanguage,
                                  "line " + std::to_string(line_no) + ": '" + rec.language + "'");
        }
        validate_record(rec);
        if (!seen.insert({rec.instance_id, rec.language}).second) {
            throw ValidationError(ErrorKind::DuplicateCell,
                                  "(" + rec.instance_id + ", " + rec.language + ") at line " +
                                      std::to_string(line_no));
        }

        auto [it, inserted] = split_of.emplace(rec.instance_id, parsed.forget);
        if (!inserted && it->second != parsed.forget) {
            throw ValidationError(ErrorKind::SplitMismatch,
                                  "'" + rec.instance_id + "' has conflicting split values");
        }
        if (manifest.forget_ids) {
            const bool declared_forget = manifest.forget_ids->count(rec.instance_id) > 0;
            const bool declared_retain = manifest.retain_ids->count(rec.instance_id) > 0;
            if (!declared_forget && !declared_retain) {
                throw ValidationError(ErrorKind::UnknownInstance,
                                      "'" + rec.instance_id + "' not in manifest partition");
            }
            if (declared_forget != parsed.forget) {
                throw ValidationError(ErrorKind::SplitMismatch,
                                      "'" + rec.instance_id + "' split disagrees with manifest");
            }
        }
        records.push_back(std::move(rec));
    }

    std::set<std::string> forget, retain;
    if (manifest.forget_ids) {
        forget = *manifest.forget_ids;
        retain = *manifest.retain_ids;
    } else {
        for (const auto& [id, is_forget] : split_of) {
            (is_forget ? forget : retain).insert(id);
        }
    }
    return EvalMatrix(DatasetSpec(manifest.languages, std::move(forget), std::move(retain)),
                      std::move(records));
}

EvalMatrix load_eval_matrix(std::istream& jsonl, const DatasetSpec& spec) {
    Manifest m;
    m.languages = spec.languages();
    m.forget_ids = spec.forget_ids();
    m.retain_ids = spec.retain_ids();
    return load_eval_matrix(jsonl, m);
}

EvalMatrix load_eval_matrix_file(const std::string& records_path,
                                 const std::string& manifest_path) {
    Manifest manifest = load_manifest_file(manifest_path);
    std::ifstream in(records_path);
    if (!in) {
        throw ValidationError(ErrorKind::InvalidConfig, "cannot open records '" + records_path + "'");
    }
    return load_eval_matrix(in, manifest);
}

void save_eval_matrix(const EvalMatrix& matrix, std::ostream& out) {
    for (const auto& [key, rec] : matrix.cells()) {
        json j{{"instance_id", rec.instance_id},
               {"language", rec.language},
               {"split", matrix.spec().is_forget(rec.instance_id) ? "forget" : "retain"},
               {"se", rec.se ? json(*rec.se) : json(nullptr)},
               {"prob", rec.prob ? json(*rec.prob) : json(nullptr)},
               {"token_count", rec.token_count ? json(*rec.token_count) : json(nullptr)}};
        out << j.dump() << '\n';
    }
}

void save_eval_matrix_file(const EvalMatrix& matrix,
                           const std::string& records_path,
                           const std::string& manifest_path) {
    std::ofstream records(records_path);
    if (!records) {
        throw ValidationError(ErrorKind::InvalidConfig, "cannot write '" + records_path + "'");
    }
    save_eval_matrix(matrix, records);
    std::ofstream manifest(manifest_path);
    if (!manifest) {
        throw ValidationError(ErrorKind::InvalidConfig, "cannot write '" + manifest_path + "'");
    }
    manifest << manifest_to_json(matrix.spec()).dump(2) << '\n';
}

} // namespace mmu
