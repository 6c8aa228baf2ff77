#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mmu/errors.hpp"

namespace mmu {

/// Per-token log probabilities for one answer sequence under the model being
/// evaluated and, optionally, under the frozen reference model.
struct SequenceLogProb {
    std::vector<double> logp_current;
    std::optional<std::vector<double>> logp_reference;
};

/// Mean over the batch of the summed sequence log likelihood. This is the
/// raw maximized term of the gradient-ascent objective; callers negate if
/// they want a descent-style loss. Always <= 0.
double ga_loss(const std::vector<SequenceLogProb>& batch);

/// ga_loss(forget) - ga_loss(retain).
double gagdr_loss(const std::vector<SequenceLogProb>& forget,
                  const std::vector<SequenceLogProb>& retain);

struct DistPair {
    std::vector<double> current;
    std::vector<double> reference;
};

/// KL(current || reference) = sum p_cur * log(p_cur / p_ref). Both vectors
/// must sum to 1 within 1e-9; a positive current mass on zero reference mass
/// is a support mismatch.
double kl_divergence(const DistPair& dists);

/// ga_loss(forget) + mean KL(current || reference) over the retain
/// distribution pairs.
double gaklr_loss(const std::vector<SequenceLogProb>& forget,
                  const std::vector<DistPair>& retain_dists);

/// Mean of -log(1 - sigmoid(beta * (log F - log F_ref))) over the batch,
/// where the log ratio is taken at sequence level. Equals ln 2 at ratio 0
/// for any beta.
double npo_loss(const std::vector<SequenceLogProb>& batch, double beta = 0.1);

/// (v - min) / (max - min); a constant vector maps to all zeros.
std::vector<double> minmax_normalize(const std::vector<double>& values);

enum class DatasetTag { Forget, Retain };

/// Per-neuron activations of one datapoint.
struct ActivationSample {
    std::vector<double> values;
    DatasetTag tag = DatasetTag::Forget;
};

/// The four per-neuron activation statistics used for structured pruning,
/// each taken over the datapoints of one sample set.
struct NeuronImportance {
    std::vector<double> std_dev;  // population standard deviation
    std::vector<double> abs_mean; // mean |z|
    std::vector<double> pos_freq; // mean I(z > 0)
    std::vector<double> rms;      // sqrt(mean z^2)

    std::size_t neuron_count() const { return std_dev.size(); }
};

NeuronImportance importance_scores(const std::vector<ActivationSample>& samples);
NeuronImportance importance_scores(const std::vector<ActivationSample>& samples, DatasetTag tag);

/// Ratio of summed MinMax-normalized forget statistics to summed
/// MinMax-normalized retain statistics per neuron; MinMax runs across
/// neurons within each of the four statistics.
std::vector<double> agnostic_importance(const NeuronImportance& forget_stats,
                                        const NeuronImportance& retain_stats,
                                        double epsilon = 1e-6);

/// Split by tag, compute both sides, combine. Needs at least one sample of
/// each tag.
std::vector<double> agnostic_importance_from_samples(const std::vector<ActivationSample>& samples,
                                                     double epsilon = 1e-6);

// --- dump formats -----------------------------------------------------------

std::vector<SequenceLogProb> load_logprobs_jsonl(std::istream& in);
std::vector<DistPair> load_dist_pairs_jsonl(std::istream& in);
std::vector<ActivationSample> load_activations_jsonl(std::istream& in);

/// Binary columnar activation dump for large neuron counts. Layout:
///   bytes 0..7   magic "MMUACT1\0"
///   bytes 8..15  uint64 LE sample count
///   bytes 16..23 uint64 LE neuron count
///   then per sample: uint8 tag (0 = forget, 1 = retain) followed by
///   neuron-count little-endian IEEE-754 64-bit floats.
std::vector<ActivationSample> load_activations_binary(std::istream& in);
void save_activations_binary(const std::vector<ActivationSample>& samples, std::ostream& out);

} // namespace mmu
