#include "mmu/judges.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"

namespace mmu {

using nlohmann::json;

// ---------------------------------------------------------------------------
// mock backends
// ---------------------------------------------------------------------------

void DictionaryTranslator::add(const std::string& source_lang, const std::string& target_lang,
                               const std::string& from, const std::string& to) {
    tables_[{source_lang, target_lang}][from] = to;
}

std::string DictionaryTranslator::translate(const std::string& text,
                                            const std::string& source_lang,
                                            const std::string& target_lang) {
    const auto table_it = tables_.find({source_lang, target_lang});
    std::istringstream in(text);
    std::ostringstream out;
    std::string token;
    bool first = true;
    while (in >> token) {
        if (!first) out << ' ';
        first = false;
        if (table_it != tables_.end()) {
            auto it = table_it->second.find(token);
            if (it != table_it->second.end()) {
                out << it->second;
                continue;
            }
        }
        out << token; // unknown tokens (names, numbers) pass through
    }
    // translators are total: tokenless input passes through unchanged
    return first ? text : out.str();
}

std::string NormalizingExactJudge::normalize(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (std::ispunct(c)) continue;
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

int NormalizingExactJudge::equivalent(const std::string& candidate, const std::string& reference) {
    return normalize(candidate) == normalize(reference) ? 1 : 0;
}

// ---------------------------------------------------------------------------
// HTTP backends
// ---------------------------------------------------------------------------

std::string JudgePromptTemplate::render(const std::string& candidate,
                                        const std::string& reference) const {
    std::string out = user_template;
    auto replace_all = [&out](const std::string& slot, const std::string& value) {
        std::size_t pos = 0;
        while ((pos = out.find(slot, pos)) != std::string::npos) {
            out.replace(pos, slot.size(), value);
            pos += value.size();
        }
    };
    replace_all("{candidate}", candidate);
    replace_all("{reference}", reference);
    return out;
}

JudgePromptTemplate JudgePromptTemplate::from_json(const json& j) {
    JudgePromptTemplate tmpl;
    tmpl.system = j.value("system", "");
    tmpl.user_template = j.at("user_template").get<std::string>();
    if (tmpl.user_template.find("{candidate}") == std::string::npos ||
        tmpl.user_template.find("{reference}") == std::string::npos) {
        throw ValidationError(ErrorKind::MissingTemplate,
                              "judge prompt needs {candidate} and {reference} slots");
    }
    return tmpl;
}

JudgePromptTemplate JudgePromptTemplate::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError(ErrorKind::MissingTemplate,
                              "cannot open prompt template '" + path.string() + "'");
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError(ErrorKind::MissingTemplate,
                              std::string("bad prompt template JSON: ") + e.what());
    }
    return from_json(j);
}

namespace {

json post_json(const HttpClientConfig& config, const std::string& path, const json& body,
               ErrorKind failure_kind) {
    httplib::Client client(config.base_url);
    const auto timeout =
        std::chrono::milliseconds(static_cast<long long>(config.timeout_seconds * 1000.0));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers headers;
    if (!config.auth_token_env.empty()) {
        const char* token = std::getenv(config.auth_token_env.c_str());
        if (!token) {
            throw ValidationError(ErrorKind::InvalidConfig,
                                  "env var '" + config.auth_token_env + "' is not set");
        }
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    std::string last_error;
    for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(
                std::chrono::milliseconds(config.backoff_initial_ms << (attempt - 1)));
        }
        auto result = client.Post(path, headers, body.dump(), "application/json");
        if (!result) {
            last_error = httplib::to_string(result.error());
            continue;
        }
        if (result->status != 200) {
            last_error = "HTTP " + std::to_string(result->status);
            continue;
        }
        try {
            return json::parse(result->body);
        } catch (const json::exception& e) {
            // a 200 with an unparseable body is a broken service, not a blip
            throw TransportError(failure_kind,
                                 config.base_url + path + " returned invalid JSON: " + e.what());
        }
    }
    throw TransportError(failure_kind, config.base_url + path + " failed after " +
                                           std::to_string(config.max_retries + 1) +
                                           " attempts: " + last_error);
}

} // namespace

HttpTranslator::HttpTranslator(HttpClientConfig config) : config_(std::move(config)) {}

std::string HttpTranslator::translate(const std::string& text, const std::string& source_lang,
                                      const std::string& target_lang) {
    const json response = post_json(
        config_, "/translate",
        json{{"text", text}, {"source", source_lang}, {"target", target_lang}},
        ErrorKind::TranslatorUnavailable);
    if (!response.contains("text") || !response["text"].is_string()) {
        throw TransportError(ErrorKind::TranslatorUnavailable,
                             "translator response lacks a string 'text' field");
    }
    return response["text"].get<std::string>();
}

std::string HttpTranslator::id() const { return "http-translator@" + config_.base_url; }

HttpJudge::HttpJudge(HttpClientConfig config, JudgePromptTemplate prompt)
    : config_(std::move(config)), prompt_(std::move(prompt)) {}

int HttpJudge::equivalent(const std::string& candidate, const std::string& reference) {
    const json response = post_json(config_, "/judge",
                                    json{{"system", prompt_.system},
                                         {"prompt", prompt_.render(candidate, reference)},
                                         {"candidate", candidate},
                                         {"reference", reference}},
                                    ErrorKind::JudgeUnavailable);
    // the judge must answer with a structured bit; free text is not parsed
    if (!response.contains("verdict") || !response["verdict"].is_number_integer()) {
        throw TransportError(ErrorKind::JudgeUnavailable,
                             "judge response lacks an integer 'verdict' field");
    }
    const int verdict = response["verdict"].get<int>();
    if (verdict != 0 && verdict != 1) {
        throw TransportError(ErrorKind::JudgeUnavailable,
                             "judge verdict must be 0 or 1, got " + std::to_string(verdict));
    }
    return verdict;
}

std::string HttpJudge::id() const { return "http-judge@" + config_.base_url; }

// ---------------------------------------------------------------------------
// cache
// ---------------------------------------------------------------------------

JudgeCache::JudgeCache(std::filesystem::path file) : file_(std::move(file)) {
    std::ifstream in(*file_);
    if (!in) return; // fresh cache file, created on first store
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
            Key key{j.at("candidate").get<std::string>(), j.at("reference").get<std::string>(),
                    j.at("judge_id").get<std::string>()};
            entries_[key] = j.at("verdict").get<int>();
        } catch (const json::exception& e) {
            throw ValidationError(ErrorKind::MalformedLine,
                                  "cache line " + std::to_string(line_no) + ": " + e.what());
        }
    }
}

std::optional<int> JudgeCache::lookup(const std::string& candidate, const std::string& reference,
                                      const std::string& judge_id) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find({candidate, reference, judge_id});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void JudgeCache::store(const std::string& candidate, const std::string& reference,
                       const std::string& judge_id, int verdict) {
    std::lock_guard lock(mutex_);
    const Key key{candidate, reference, judge_id};
    if (entries_.emplace(key, verdict).first->second != verdict) {
        entries_[key] = verdict; // last write wins
    }
    if (file_) {
        std::ofstream out(*file_, std::ios::app);
        out << json{{"candidate", candidate},
                    {"reference", reference},
                    {"judge_id", judge_id},
                    {"verdict", verdict}}
                   .dump()
            << '\n';
    }
}

std::size_t JudgeCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

// ---------------------------------------------------------------------------
// semantic equivalence
// ---------------------------------------------------------------------------

int semantic_equivalence(const std::string& model_output, const std::string& ground_truth,
                         const std::string& lang, TranslatorClient& translator,
                         JudgeClient& judge, const SeOptions& options) {
    if (model_output.empty() || ground_truth.empty()) {
        throw ValidationError(ErrorKind::EmptyInput,
                              "semantic_equivalence needs non-empty texts");
    }
    const bool skip = lang == options.pivot && !options.translate_pivot;
    const std::string candidate =
        skip ? model_output : translator.translate(model_output, lang, options.pivot);
    const std::string reference =
        skip ? ground_truth : translator.translate(ground_truth, lang, options.pivot);
    return judge.equivalent(candidate, reference);
}

namespace {

// Cache hits must bypass the translator too, so the key is built from the
// raw texts plus an id covering the whole judging pipeline.
std::string pipeline_id(const TranslatorClient& translator, const JudgeClient& judge,
                        const std::string& lang, const SeOptions& options) {
    return judge.id() + "/" + translator.id() + "/" + lang + ">" + options.pivot;
}

} // namespace

BatchSeResult batch_se(const std::vector<SePair>& pairs, TranslatorClient& translator,
                       JudgeClient& judge, JudgeCache& cache, const BatchSeOptions& options) {
    BatchSeResult result;
    std::mutex result_mutex;

    auto process = [&](const SePair& pair) {
        const std::string key_id = pipeline_id(translator, judge, pair.lang, options.se);
        try {
            int verdict;
            if (auto cached = cache.lookup(pair.model_output, pair.ground_truth, key_id)) {
                verdict = *cached;
            } else {
                verdict = semantic_equivalence(pair.model_output, pair.ground_truth, pair.lang,
                                               translator, judge, options.se);
                cache.store(pair.model_output, pair.ground_truth, key_id, verdict);
            }
            EvalRecord rec;
            rec.instance_id = pair.instance_id;
            rec.language = pair.lang;
            rec.se = verdict;
            std::lock_guard lock(result_mutex);
            result.records.push_back(std::move(rec));
        } catch (const std::exception& e) {
            std::lock_guard lock(result_mutex);
            result.failures.push_back({pair.instance_id, pair.lang, e.what()});
        }
    };

    const int workers = std::max(1, options.max_in_flight);
    if (workers == 1 || pairs.size() <= 1) {
        for (const auto& pair : pairs) process(pair);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        const int n_threads = std::min<std::size_t>(workers, pairs.size());
        pool.reserve(n_threads);
        for (int t = 0; t < n_threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < pairs.size(); i = next.fetch_add(1)) {
                    process(pairs[i]);
                }
            });
        }
        for (auto& thread : pool) thread.join();
    }

    // deterministic output order regardless of input permutation or thread
    // interleaving
    std::sort(result.records.begin(), result.records.end(),
              [](const EvalRecord& a, const EvalRecord& b) {
                  return std::tie(a.instance_id, a.language) < std::tie(b.instance_id, b.language);
              });
    std::sort(result.failures.begin(), result.failures.end(),
              [](const SeFailure& a, const SeFailure& b) {
                  return std::tie(a.instance_id, a.lang) < std::tie(b.instance_id, b.lang);
              });
    return result;
}

} // namespace mmu
