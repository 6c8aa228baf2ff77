#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmu/core.hpp"

namespace mmu {

/// Translation backend. Implementations must be total: non-empty input never
/// yields empty output.
class TranslatorClient {
public:
    virtual ~TranslatorClient() = default;
    virtual std::string translate(const std::string& text, const std::string& source_lang,
                                  const std::string& target_lang) = 0;
    virtual std::string id() const = 0;
};

/// Binary equivalence judge.
class JudgeClient {
public:
    virtual ~JudgeClient() = default;
    virtual int equivalent(const std::string& candidate, const std::string& reference) = 0;
    virtual std::string id() const = 0;
};

/// Rewrites a failed translation candidate given the source text.
class RewriteClient {
public:
    virtual ~RewriteClient() = default;
    virtual std::string refine(const std::string& source_text, const std::string& failed_candidate,
                               const std::string& target_lang) = 0;
};

// --- deterministic mock backends --------------------------------------------

class IdentityTranslator final : public TranslatorClient {
public:
    std::string translate(const std::string& text, const std::string&,
                          const std::string&) override {
        return text;
    }
    std::string id() const override { return "mock-identity"; }
};

/// Word-for-word dictionary translation; unknown tokens pass through, so
/// personal names survive untouched. Lookups are directional on
/// (source, target).
class DictionaryTranslator final : public TranslatorClient {
public:
    void add(const std::string& source_lang, const std::string& target_lang,
             const std::string& from, const std::string& to);
    std::string translate(const std::string& text, const std::string& source_lang,
                          const std::string& target_lang) override;
    std::string id() const override { return "mock-dictionary"; }

private:
    std::map<std::pair<std::string, std::string>, std::map<std::string, std::string>> tables_;
};

/// Case-folding, whitespace-normalizing, punctuation-stripping exact match.
class NormalizingExactJudge final : public JudgeClient {
public:
    int equivalent(const std::string& candidate, const std::string& reference) override;
    std::string id() const override { return "mock-exact"; }

    static std::string normalize(const std::string& text);
};

/// Echoes the failed candidate back; enough for loop-bound tests.
class PassthroughRewriter final : public RewriteClient {
public:
    std::string refine(const std::string&, const std::string& failed_candidate,
                       const std::string&) override {
        return failed_candidate;
    }
};

// --- HTTP backends ------------------------------------------------------------

struct HttpClientConfig {
    std::string base_url;              // e.g. "http://localhost:8080"
    std::string auth_token_env;        // env var holding the bearer token; empty = no auth
    double timeout_seconds = 30.0;
    int max_retries = 3;               // retries after the first attempt
    int backoff_initial_ms = 200;      // doubles per retry
};

/// Prompt template with {candidate} and {reference} slots, loadable from a
/// JSON config file.
struct JudgePromptTemplate {
    std::string system;
    std::string user_template;

    std::string render(const std::string& candidate, const std::string& reference) const;
    static JudgePromptTemplate from_json(const nlohmann::json& j);
    static JudgePromptTemplate load_file(const std::filesystem::path& path);
};

/// POST {base_url}/translate with {"text", "source", "target"}; expects
/// {"text": "..."}. Retries with exponential backoff, then raises
/// TranslatorUnavailable.
class HttpTranslator final : public TranslatorClient {
public:
    explicit HttpTranslator(HttpClientConfig config);
    std::string translate(const std::string& text, const std::string& source_lang,
                          const std::string& target_lang) override;
    std::string id() const override;

private:
    HttpClientConfig config_;
};

/// POST {base_url}/judge with the rendered prompt plus raw candidate and
/// reference; the service must answer with a structured {"verdict": 0|1}.
/// Anything else is a transport failure, never a verdict.
class HttpJudge final : public JudgeClient {
public:
    HttpJudge(HttpClientConfig config, JudgePromptTemplate prompt);
    int equivalent(const std::string& candidate, const std::string& reference) override;
    std::string id() const override;

private:
    HttpClientConfig config_;
    JudgePromptTemplate prompt_;
};

// --- cache -------------------------------------------------------------------

/// Verdict cache keyed on (candidate, reference, judge_id), persisted as
/// append-only JSONL when constructed with a path. Safe for concurrent
/// lookup/store; identical keys always carry identical verdicts, so
/// last-write-wins is harmless.
class JudgeCache {
public:
    JudgeCache() = default;
    explicit JudgeCache(std::filesystem::path file);

    std::optional<int> lookup(const std::string& candidate, const std::string& reference,
                              const std::string& judge_id) const;
    void store(const std::string& candidate, const std::string& reference,
               const std::string& judge_id, int verdict);
    std::size_t size() const;

private:
    using Key = std::tuple<std::string, std::string, std::string>;
    std::map<Key, int> entries_;
    std::optional<std::filesystem::path> file_;
    mutable std::mutex mutex_;
};

// --- semantic equivalence ------------------------------------------------------

struct SeOptions {
    std::string pivot = "en";
    /// The default translates pivot-language text through the translator as
    /// well, matching the uniform treatment of all languages; disable to
    /// skip the redundant hop.
    bool translate_pivot = true;
};

/// Translate both texts into the pivot language, then ask the judge.
int semantic_equivalence(const std::string& model_output, const std::string& ground_truth,
                         const std::string& lang, TranslatorClient& translator,
                         JudgeClient& judge, const SeOptions& options = {});

struct SePair {
    std::string instance_id;
    std::string lang;
    std::string model_output;
    std::string ground_truth;
};

struct SeFailure {
    std::string instance_id;
    std::string lang;
    std::string message;
};

struct BatchSeResult {
    std::vector<EvalRecord> records; // sorted by (instance_id, lang)
    std::vector<SeFailure> failures; // failed cells stay absent from records
};

struct BatchSeOptions {
    SeOptions se;
    int max_in_flight = 1; // > 1 enables concurrent client calls
};

/// Fills `se` for every pair. Cache hits bypass both clients; failures are
/// collected instead of aborting the batch.
BatchSeResult batch_se(const std::vector<SePair>& pairs, TranslatorClient& translator,
                       JudgeClient& judge, JudgeCache& cache, const BatchSeOptions& options = {});

} // namespace mmu
