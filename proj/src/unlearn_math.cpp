#include "mmu/unlearn_math.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

#include <nlohmann/json.hpp>

namespace mmu {

using nlohmann::json;

namespace {

double sequence_sum(const std::vector<double>& logps, const char* what) {
    double sum = 0.0;
    for (double lp : logps) {
        if (lp > 0.0) {
            throw ValidationError(ErrorKind::PositiveLogProb,
                                  std::string(what) + " contains a positive log probability");
        }
        sum += lp;
    }
    return sum;
}

// log(1 + e^x) without overflow
double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

} // namespace

double ga_loss(const std::vector<SequenceLogProb>& batch) {
    if (batch.empty()) {
        throw ValidationError(ErrorKind::EmptyBatch, "ga_loss over an empty batch");
    }
    double total = 0.0;
    for (const auto& seq : batch) {
        total += sequence_sum(seq.logp_current, "logp_current");
    }
    return total / static_cast<double>(batch.size());
}

double gagdr_loss(const std::vector<SequenceLogProb>& forget,
                  const std::vector<SequenceLogProb>& retain) {
    return ga_loss(forget) - ga_loss(retain);
}

double kl_divergence(const DistPair& dists) {
    if (dists.current.size() != dists.reference.size()) {
        throw ValidationError(ErrorKind::SupportMismatch,
                              "distribution sizes differ: " + std::to_string(dists.current.size()) +
                                  " vs " + std::to_string(dists.reference.size()));
    }
    if (dists.current.empty()) {
        throw ValidationError(ErrorKind::EmptyInput, "empty distribution");
    }
    auto check_normalized = [](const std::vector<double>& p, const char* name) {
        double sum = 0.0;
        for (double v : p) {
            if (v < 0.0) {
                throw ValidationError(ErrorKind::UnnormalizedDistribution,
                                      std::string(name) + " has a negative entry");
            }
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw ValidationError(ErrorKind::UnnormalizedDistribution,
                                  std::string(name) + " sums to " + std::to_string(sum));
        }
    };
    check_normalized(dists.current, "current");
    check_normalized(dists.reference, "reference");

    double kl = 0.0;
    for (std::size_t i = 0; i < dists.current.size(); ++i) {
        const double p = dists.current[i];
        const double q = dists.reference[i];
        if (p == 0.0) continue; // 0 * log 0 = 0
        if (q == 0.0) {
            throw ValidationError(ErrorKind::SupportMismatch,
                                  "current has mass where reference is zero (index " +
                                      std::to_string(i) + ")");
        }
        kl += p * std::log(p / q);
    }
    return kl;
}

double gaklr_loss(const std::vector<SequenceLogProb>& forget,
                  const std::vector<DistPair>& retain_dists) {
    const double ga = ga_loss(forget);
    if (retain_dists.empty()) {
        throw ValidationError(ErrorKind::EmptyBatch, "gaklr_loss needs retain distributions");
    }
    double kl_sum = 0.0;
    for (const auto& pair : retain_dists) kl_sum += kl_divergence(pair);
    return ga + kl_sum / static_cast<double>(retain_dists.size());
}

double npo_loss(const std::vector<SequenceLogProb>& batch, double beta) {
    if (batch.empty()) {
        throw ValidationError(ErrorKind::EmptyBatch, "npo_loss over an empty batch");
    }
    if (beta <= 0.0) {
        throw ValidationError(ErrorKind::InvalidConfig, "beta must be > 0");
    }
    double total = 0.0;
    for (const auto& seq : batch) {
        if (!seq.logp_reference) {
            throw ValidationError(ErrorKind::MissingReference,
                                  "npo_loss needs reference log probabilities");
        }
        if (seq.logp_reference->size() != seq.logp_current.size()) {
            throw ValidationError(ErrorKind::DimensionMismatch,
                                  "current/reference token counts differ");
        }
        const double log_ratio = sequence_sum(seq.logp_current, "logp_current") -
                                 sequence_sum(*seq.logp_reference, "logp_reference");
        // -log(1 - sigmoid(x)) = softplus(x)
        total += softplus(beta * log_ratio);
    }
    return total / static_cast<double>(batch.size());
}

std::vector<double> minmax_normalize(const std::vector<double>& values) {
    if (values.empty()) {
        throw ValidationError(ErrorKind::EmptyInput, "minmax_normalize over an empty vector");
    }
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it;
    const double range = *hi_it - lo;
    std::vector<double> out(values.size(), 0.0);
    if (range == 0.0) return out; // constant vector carries no information
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = (values[i] - lo) / range;
    }
    return out;
}

namespace {

NeuronImportance importance_over(const std::vector<const ActivationSample*>& samples) {
    if (samples.empty()) {
        throw ValidationError(ErrorKind::EmptyDataset, "no activation samples");
    }
    const std::size_t n_neurons = samples.front()->values.size();
    for (const auto* s : samples) {
        if (s->values.size() != n_neurons) {
            throw ValidationError(ErrorKind::DimensionMismatch,
                                  "activation samples disagree on neuron count");
        }
        for (double z : s->values) {
            if (!std::isfinite(z)) {
                throw ValidationError(ErrorKind::InvalidConfig,
                                      "activation values must be finite");
            }
        }
    }

    const double n = static_cast<double>(samples.size());
    NeuronImportance out;
    out.std_dev.resize(n_neurons);
    out.abs_mean.resize(n_neurons);
    out.pos_freq.resize(n_neurons);
    out.rms.resize(n_neurons);

    for (std::size_t j = 0; j < n_neurons; ++j) {
        double sum = 0.0, abs_sum = 0.0, sq_sum = 0.0;
        double pos = 0.0;
        for (const auto* s : samples) {
            const double z = s->values[j];
            sum += z;
            abs_sum += std::abs(z);
            sq_sum += z * z;
            if (z > 0.0) pos += 1.0;
        }
        const double mean = sum / n;
        double var = 0.0;
        for (const auto* s : samples) {
            const double d = s->values[j] - mean;
            var += d * d;
        }
        out.std_dev[j] = std::sqrt(var / n);
        out.abs_mean[j] = abs_sum / n;
        out.pos_freq[j] = pos / n;
        out.rms[j] = std::sqrt(sq_sum / n);
    }
    return out;
}

} // namespace

NeuronImportance importance_scores(const std::vector<ActivationSample>& samples) {
    std::vector<const ActivationSample*> ptrs;
    ptrs.reserve(samples.size());
    for (const auto& s : samples) ptrs.push_back(&s);
    return importance_over(ptrs);
}

NeuronImportance importance_scores(const std::vector<ActivationSample>& samples, DatasetTag tag) {
    std::vector<const ActivationSample*> ptrs;
    for (const auto& s : samples) {
        if (s.tag == tag) ptrs.push_back(&s);
    }
    return importance_over(ptrs);
}

std::vector<double> agnostic_importance(const NeuronImportance& forget_stats,
                                        const NeuronImportance& retain_stats,
                                        double epsilon) {
    const std::size_t n = forget_stats.neuron_count();
    if (retain_stats.neuron_count() != n) {
        throw ValidationError(ErrorKind::DimensionMismatch,
                              "forget/retain statistics disagree on neuron count");
    }
    if (epsilon <= 0.0) {
        throw ValidationError(ErrorKind::InvalidConfig, "epsilon must be > 0");
    }

    auto summed_minmax = [n](const NeuronImportance& stats) {
        std::vector<double> total(n, 0.0);
        for (const auto* stat :
             {&stats.std_dev, &stats.abs_mean, &stats.pos_freq, &stats.rms}) {
            const std::vector<double> normalized = minmax_normalize(*stat);
            for (std::size_t j = 0; j < n; ++j) total[j] += normalized[j];
        }
        return total;
    };

    const std::vector<double> numer = summed_minmax(forget_stats);
    const std::vector<double> denom = summed_minmax(retain_stats);
    std::vector<double> out(n);
    for (std::size_t j = 0; j < n; ++j) {
        out[j] = numer[j] / (denom[j] + epsilon);
    }
    return out;
}

std::vector<double> agnostic_importance_from_samples(const std::vector<ActivationSample>& samples,
                                                     double epsilon) {
    return agnostic_importance(importance_scores(samples, DatasetTag::Forget),
                               importance_scores(samples, DatasetTag::Retain), epsilon);
}

// ---------------------------------------------------------------------------
// dump formats
// ---------------------------------------------------------------------------

namespace {

json parse_line(const std::string& line, std::size_t line_no) {
    try {
        return json::parse(line);
    } catch (const json::exception& e) {
        throw ValidationError(ErrorKind::MalformedLine,
                              "line " + std::to_string(line_no) + ": " + e.what());
    }
}

} // namespace

std::vector<SequenceLogProb> load_logprobs_jsonl(std::istream& in) {
    std::vector<SequenceLogProb> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const json j = parse_line(line, line_no);
        SequenceLogProb seq;
        try {
            seq.logp_current = j.at("logp_current").get<std::vector<double>>();
            if (j.contains("logp_reference") && !j["logp_reference"].is_null()) {
                seq.logp_reference = j["logp_reference"].get<std::vector<double>>();
            }
        } catch (const json::exception& e) {
            throw ValidationError(ErrorKind::MalformedLine,
                                  "line " + std::to_string(line_no) + ": " + e.what());
        }
        out.push_back(std::move(seq));
    }
    return out;
}

std::vector<DistPair> load_dist_pairs_jsonl(std::istream& in) {
    std::vector<DistPair> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const json j = parse_line(line, line_no);
        DistPair pair;
        try {
            pair.current = j.at("current").get<std::vector<double>>();
            pair.reference = j.at("reference").get<std::vector<double>>();
        } catch (const json::exception& e) {
            throw ValidationError(ErrorKind::MalformedLine,
                                  "line " + std::to_string(line_no) + ": " + e.what());
        }
        out.push_back(std::move(pair));
    }
    return out;
}

namespace {

DatasetTag tag_from_string(const std::string& s, std::size_t line_no) {
    if (s == "forget") return DatasetTag::Forget;
    if (s == "retain") return DatasetTag::Retain;
    throw ValidationError(ErrorKind::MalformedLine,
                          "line " + std::to_string(line_no) + ": tag must be forget|retain");
}

} // namespace

std::vector<ActivationSample> load_activations_jsonl(std::istream& in) {
    std::vector<ActivationSample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const json j = parse_line(line, line_no);
        ActivationSample sample;
        try {
            sample.values = j.at("neuron_values").get<std::vector<double>>();
            sample.tag = tag_from_string(j.at("tag").get<std::string>(), line_no);
        } catch (const json::exception& e) {
            throw ValidationError(ErrorKind::MalformedLine,
                                  "line " + std::to_string(line_no) + ": " + e.what());
        }
        out.push_back(std::move(sample));
    }
    return out;
}

static constexpr char kActivationMagic[8] = {'M', 'M', 'U', 'A', 'C', 'T', '1', '\0'};

namespace {

std::uint64_t read_u64_le(std::istream& in) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[i];
    return v;
}

void write_u64_le(std::ostream& out, std::uint64_t v) {
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(bytes), 8);
}

double read_f64_le(std::istream& in) {
    const std::uint64_t bits = read_u64_le(in);
    double d;
    std::memcpy(&d, &bits, sizeof(d));
    return d;
}

void write_f64_le(std::ostream& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof(bits));
    write_u64_le(out, bits);
}

} // namespace

std::vector<ActivationSample> load_activations_binary(std::istream& in) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kActivationMagic, 8) != 0) {
        throw ValidationError(ErrorKind::MalformedLine, "bad activation dump magic");
    }
    const std::uint64_t n_samples = read_u64_le(in);
    const std::uint64_t n_neurons = read_u64_le(in);
    if (!in) {
        throw ValidationError(ErrorKind::MalformedLine, "truncated activation dump header");
    }

    std::vector<ActivationSample> out;
    out.reserve(n_samples);
    for (std::uint64_t s = 0; s < n_samples; ++s) {
        ActivationSample sample;
        char tag_byte = 0;
        in.read(&tag_byte, 1);
        sample.tag = tag_byte == 0 ? DatasetTag::Forget : DatasetTag::Retain;
        sample.values.reserve(n_neurons);
        for (std::uint64_t j = 0; j < n_neurons; ++j) {
            sample.values.push_back(read_f64_le(in));
        }
        if (!in) {
            throw ValidationError(ErrorKind::MalformedLine, "truncated activation dump body");
        }
        out.push_back(std::move(sample));
    }
    return out;
}

void save_activations_binary(const std::vector<ActivationSample>& samples, std::ostream& out) {
    const std::uint64_t n_neurons = samples.empty() ? 0 : samples.front().values.size();
    for (const auto& s : samples) {
        if (s.values.size() != n_neurons) {
            throw ValidationError(ErrorKind::DimensionMismatch,
                                  "activation samples disagree on neuron count");
        }
    }
    out.write(kActivationMagic, 8);
    write_u64_le(out, samples.size());
    write_u64_le(out, n_neurons);
    for (const auto& s : samples) {
        const char tag_byte = s.tag == DatasetTag::Forget ? 0 : 1;
        out.write(&tag_byte, 1);
        for (double z : s.values) write_f64_le(out, z);
    }
}

} // namespace mmu
