#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmu/errors.hpp"

namespace mmu {

enum class LanguageRole { Training, HoldOut };

struct LanguageId {
    std::string code; // non-empty, lowercase, unique within a DatasetSpec
    LanguageRole role = LanguageRole::Training;

    bool operator==(const LanguageId&) const = default;
};

/// Language roster plus the forget/retain instance partition. Immutable once
/// constructed; the constructor validates every invariant.
class DatasetSpec {
public:
    DatasetSpec(std::vector<LanguageId> languages,
                std::set<std::string> forget_ids,
                std::set<std::string> retain_ids);

    const std::vector<LanguageId>& languages() const { return languages_; }
    std::vector<std::string> language_codes() const;
    std::vector<std::string> codes_with_role(LanguageRole role) const;
    std::vector<std::string> training_languages() const;
    std::vector<std::string> holdout_languages() const;

    bool has_language(const std::string& code) const;
    LanguageRole role_of(const std::string& code) const; // throws UnknownLanguage

    const std::set<std::string>& forget_ids() const { return forget_ids_; }
    const std::set<std::string>& retain_ids() const { return retain_ids_; }
    bool has_instance(const std::string& id) const;
    bool is_forget(const std::string& id) const; // throws UnknownInstance
    std::vector<std::string> all_ids() const;    // forget ∪ retain, sorted
    std::size_t instance_count() const { return forget_ids_.size() + retain_ids_.size(); }

    bool operator==(const DatasetSpec&) const = default;

private:
    std::vector<LanguageId> languages_;
    std::set<std::string> forget_ids_;
    std::set<std::string> retain_ids_;
};

/// One per-instance, per-language observation. `se` and `prob` are both
/// optional so generation-only or probability-only pipelines can run; each
/// metric declares which field it needs.
struct EvalRecord {
    std::string instance_id;
    std::string language;
    std::optional<int> se;          // 0 or 1
    std::optional<double> prob;     // in [0, 1]
    std::optional<int> token_count; // >= 1

    bool operator==(const EvalRecord&) const = default;
};

using CellKey = std::pair<std::string, std::string>; // (instance_id, language)

/// The |I|x|L| grid of evaluation records. Immutable after construction and
/// safe for concurrent reads. Missing cells are hard errors at query time,
/// never imputed.
class EvalMatrix {
public:
    EvalMatrix(DatasetSpec spec, std::vector<EvalRecord> records);

    const DatasetSpec& spec() const { return spec_; }
    std::size_t size() const { return cells_.size(); }

    const EvalRecord& at(const std::string& instance_id,
                         const std::string& language) const; // throws MissingCell
    const EvalRecord* find(const std::string& instance_id,
                           const std::string& language) const;

    const std::map<CellKey, EvalRecord>& cells() const { return cells_; }

    /// Restriction to a language and instance subset. The restricted grid
    /// must be complete: any absent cell raises MissingCell.
    EvalMatrix sliced(const std::vector<std::string>& langs,
                      const std::vector<std::string>& ids) const;
    EvalMatrix sliced_languages(const std::vector<std::string>& langs) const;

    bool operator==(const EvalMatrix&) const = default;

private:
    DatasetSpec spec_;
    std::map<CellKey, EvalRecord> cells_;
};

/// Sidecar manifest: language roster with roles, optionally the explicit id
/// partition. When the partition is present, every record's `split` field
/// must agree with it.
struct Manifest {
    std::vector<LanguageId> languages;
    std::optional<std::set<std::string>> forget_ids;
    std::optional<std::set<std::string>> retain_ids;
};

Manifest manifest_from_json(const nlohmann::json& j);
nlohmann::json manifest_to_json(const DatasetSpec& spec);
Manifest load_manifest(std::istream& in);
Manifest load_manifest_file(const std::string& path);

/// Newline-delimited JSON records. The partition is taken from the manifest
/// when declared, otherwise derived from the records' `split` fields (which
/// must be consistent per instance).
EvalMatrix load_eval_matrix(std::istream& jsonl, const Manifest& manifest);
EvalMatrix load_eval_matrix(std::istream& jsonl, const DatasetSpec& spec);
EvalMatrix load_eval_matrix_file(const std::string& records_path,
                                 const std::string& manifest_path);

void save_eval_matrix(const EvalMatrix& matrix, std::ostream& out);
void save_eval_matrix_file(const EvalMatrix& matrix,
                           const std::string& records_path,
                           const std::string& manifest_path);

} // namespace mmu
