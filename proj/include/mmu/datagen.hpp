#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmu/judges.hpp"

namespace mmu {

/// Pre-specified value pool for one profile attribute.
struct AttributePool {
    std::string attribute_name;
    std::vector<std::string> values; // non-empty, unique
};

/// Synthetic identity: a name plus one chosen value per remaining attribute.
struct Profile {
    std::string name;
    std::map<std::string, std::string> attributes;
};

/// Conjunction of attribute=value conditions; a profile matching all of them
/// is excluded. Stands in for the manual common-sense filtering pass.
struct ExclusionRule {
    std::map<std::string, std::string> conditions;

    bool matches(const Profile& profile) const;
};

std::vector<AttributePool> attribute_pools_from_json(const nlohmann::json& j);
std::vector<AttributePool> load_attribute_pools_file(const std::string& path);
std::vector<ExclusionRule> exclusion_rules_from_json(const nlohmann::json& j);
std::vector<ExclusionRule> load_exclusion_rules_file(const std::string& path);

/// Uniform per-attribute sampling, deterministic for a given seed. Profiles
/// hitting an exclusion rule are resampled; after max_retries consecutive
/// rejections the constraint set is declared unsatisfiable. The pool named
/// "name" feeds Profile::name; every other pool feeds the attribute map.
std::vector<Profile> sample_profiles(const std::vector<AttributePool>& pools, std::size_t n,
                                     std::uint64_t seed,
                                     const std::vector<ExclusionRule>& rules = {},
                                     int max_retries = 1000);

/// Value histogram and normalized entropy for one attribute across profiles.
struct AttributeSkew {
    std::map<std::string, std::size_t> histogram;
    double normalized_entropy = 0.0; // H / log(|pool|), in [0, 1]
    bool flagged = false;            // below the skew threshold
};

/// Diagnoses lexical skew: entropy 1 means the sampled values are uniform
/// over the pool, 0 means a single value dominates completely. Attributes
/// under `flag_threshold` are marked.
std::map<std::string, AttributeSkew> skew_report(const std::vector<Profile>& profiles,
                                                 const std::vector<AttributePool>& pools,
                                                 double flag_threshold = 0.5);

/// One question/answer pair about a single attribute of a single subject.
struct QaPair {
    std::string instance_id;
    std::string question;
    std::string answer;
    std::string language;
    std::string attribute;
    std::string subject_name;
};

/// Question/answer templates with {name}, {attribute} and {value} slots.
struct QaTemplate {
    std::string question;
    std::string answer;
};

struct TemplateSet {
    std::map<std::string, QaTemplate> by_attribute;
    QaTemplate fallback{"What is {name}'s {attribute}?", "{name}'s {attribute} is {value}."};

    const QaTemplate& for_attribute(const std::string& attribute) const;
};

TemplateSet templates_from_json(const nlohmann::json& j);

/// Deterministic template fill in the pivot language. An LLM-backed
/// generator can implement QaGeneratorClient behind the same contract.
QaPair build_qa(const Profile& profile, const std::string& attribute,
                const TemplateSet& templates);

class QaGeneratorClient {
public:
    virtual ~QaGeneratorClient() = default;
    virtual QaPair generate(const Profile& profile, const std::string& attribute) = 0;
};

class TemplateQaGenerator final : public QaGeneratorClient {
public:
    explicit TemplateQaGenerator(TemplateSet templates) : templates_(std::move(templates)) {}
    QaPair generate(const Profile& profile, const std::string& attribute) override {
        return build_qa(profile, attribute, templates_);
    }

private:
    TemplateSet templates_;
};

enum class RefineStatus { Pending, Verified, Failed };
enum class QaField { Question, Answer };

struct RefineState {
    QaPair source; // pivot-language pair
    QaField field = QaField::Question;
    std::string candidate_translation;
    std::string back_translation;
    int iterations = 0;
    RefineStatus status = RefineStatus::Pending;
};

/// Translate one field of the pair into target_lang, back-translate, judge
/// the round trip against the source, and on failure ask the rewriter for a
/// revised candidate. Stops at Verified or after max_iterations with Failed.
/// The subject name must survive verbatim through every hop whenever the
/// source text contains it.
RefineState verify_refine(const QaPair& pair, const std::string& target_lang,
                          TranslatorClient& translator, RewriteClient& refiner,
                          JudgeClient& judge, int max_iterations = 5,
                          QaField field = QaField::Question,
                          const std::string& pivot = "en");

/// Runs verify_refine for both fields and assembles the translated pair.
struct TranslatedPair {
    QaPair pair; // target-language pair (valid when verified)
    RefineState question_state;
    RefineState answer_state;
    bool verified = false;
};

TranslatedPair translate_pair(const QaPair& pair, const std::string& target_lang,
                              TranslatorClient& translator, RewriteClient& refiner,
                              JudgeClient& judge, int max_iterations = 5,
                              const std::string& pivot = "en");

void save_qa_jsonl(const std::vector<QaPair>& pairs, std::ostream& out);
std::vector<QaPair> load_qa_jsonl(std::istream& in);

} // namespace mmu
