#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cgt/nn.hpp"

namespace cgt::coverage {

/// A neuron is one output channel of a post-nonlinearity layer.
struct NeuronId {
  int layer_index = 0;
  int channel_index = 0;

  std::string key() const;  // "layer:channel"
  static NeuronId from_key(const std::string& key);
  auto operator<=>(const NeuronId&) const = default;
};

/// act(n, x) for every neuron of one input, raw and per-layer min-max scaled.
struct ActivationSummary {
  std::vector<NeuronId> neurons;
  std::vector<double> raw;
  std::vector<double> scaled;

  std::size_t size() const noexcept { return neurons.size(); }
};

ActivationSummary summarize_trace(const nn::ActivationTrace& trace);

/// Per-neuron [low, high] raw activation range over a profiling dataset.
struct NeuronProfile {
  std::vector<NeuronId> neurons;
  std::vector<double> low;
  std::vector<double> high;
  std::string source;
  std::size_t count = 0;

  std::size_t size() const noexcept { return neurons.size(); }
};

/// Min/max over already-computed summaries. Throws ArgumentError if empty.
NeuronProfile profile_summaries(const std::vector<ActivationSummary>& summaries,
                                std::string source);
/// Runs the model over `images` and profiles the resulting activations.
NeuronProfile profile_dataset(const nn::ModelGraph& graph, const std::vector<Image>& images,
                              std::string source);

void save_profile(const NeuronProfile& profile, const std::filesystem::path& path);
NeuronProfile load_profile(const std::filesystem::path& path);

enum class Metric { nc, nbc, snac };
std::string to_string(Metric m);

/// Boolean mask over the flattened neuron list.
using NeuronMask = std::vector<bool>;

struct CoverageResult {
  Metric kind = Metric::nc;
  double threshold = 0;  // NC only
  NeuronMask covered;    // activated (NC) or UpperN (NBC, SNAC)
  NeuronMask lower;      // LowerN (NBC only; empty otherwise)
  double ratio = 0;
};

/// NC thresholds scaled activations with `t`; NBC/SNAC compare raw
/// activations against the profile. Missing inputs raise ArgumentError.
CoverageResult single_input_coverage(Metric kind, const ActivationSummary& summary,
                                     const NeuronProfile* profile,
                                     std::optional<double> t = std::nullopt);

/// Union of covered neuron sets over an input collection.
class CoverageState {
 public:
  CoverageState() = default;
  CoverageState(Metric kind, std::size_t neuron_count, double threshold = 0);

  Metric kind() const noexcept { return kind_; }
  double threshold() const noexcept { return threshold_; }
  std::size_t inputs() const noexcept { return inputs_; }
  std::size_t neuron_count() const noexcept { return covered_.size(); }
  const NeuronMask& covered() const noexcept { return covered_; }
  const NeuronMask& lower() const noexcept { return lower_; }

  /// Recomputed from the sets.
  double ratio() const noexcept;

  void add(const CoverageResult& r);
  void merge(const CoverageState& other);

  bool operator==(const CoverageState&) const = default;

 private:
  Metric kind_ = Metric::nc;
  double threshold_ = 0;
  NeuronMask covered_;
  NeuronMask lower_;
  std::size_t inputs_ = 0;
};

CoverageState accumulate_coverage(CoverageState state, const CoverageResult& result);

/// Coverage gate choices of the extended bug definition.
enum class MetricSelection { none, nc, snac, nbc, nbc_snac };
std::string to_string(MetricSelection m);
MetricSelection metric_selection_from_string(const std::string& s);

/// How NBC+SNAC combines its two component gates.
enum class Combine { conjunction, disjunction };

/// Cov(orig) < Cov(mut) for the selected metric(s). `None` is always true.
bool coverage_increase(MetricSelection selection, const ActivationSummary& orig,
                       const ActivationSummary& mut, const NeuronProfile* profile,
                       double t_single, Combine combine = Combine::conjunction);

/// Ratios of every component metric of `selection` (empty for None), in the
/// order NC, SNAC, NBC.
std::vector<std::pair<std::string, double>> selection_ratios(MetricSelection selection,
                                                             const ActivationSummary& summary,
                                                             const NeuronProfile* profile,
                                                             double t_single);

}  // namespace cgt::coverage
