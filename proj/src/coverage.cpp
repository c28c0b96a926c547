#include "cgt/coverage.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

namespace cgt::coverage {

using json = nlohmann::json;

std::string NeuronId::key() const {
  return std::to_string(layer_index) + ":" + std::to_string(channel_index);
}

NeuronId NeuronId::from_key(const std::string& key) {
  const auto colon = key.find(':');
  if (colon == std::string::npos) throw FormatError("bad neuron key '" + key + "'");
  try {
    return NeuronId{std::stoi(key.substr(0, colon)), std::stoi(key.substr(colon + 1))};
  } catch (const std::exception&) {
    throw FormatError("bad neuron key '" + key + "'");
  }
}

ActivationSummary summarize_trace(const nn::ActivationTrace& trace) {
  ActivationSummary s;
  for (const auto& layer : trace.layers) {
    const auto& means = layer.channel_means;
    if (means.empty()) continue;
    for (double v : means)
      if (!std::isfinite(v)) throw NumericError("non-finite activation in trace");
    const auto [lo, hi] = std::minmax_element(means.begin(), means.end());
    const double span = *hi - *lo;
    for (std::size_t c = 0; c < means.size(); ++c) {
      s.neurons.push_back(NeuronId{layer.layer_index, static_cast<int>(c)});
      s.raw.push_back(means[c]);
      s.scaled.push_back(span > 0 ? (means[c] - *lo) / span : 0.0);
    }
  }
  return s;
}

NeuronProfile profile_summaries(const std::vector<ActivationSummary>& summaries,
                                std::string source) {
  if (summaries.empty()) throw ArgumentError("cannot profile an empty dataset");
  NeuronProfile p;
  p.neurons = summaries.front().neurons;
  p.low = summaries.front().raw;
  p.high = summaries.front().raw;
  for (const auto& s : summaries) {
    if (s.neurons != p.neurons) throw ArgumentError("summaries come from different graphs");
    for (std::size_t i = 0; i < s.size(); ++i) {
      p.low[i] = std::min(p.low[i], s.raw[i]);
      p.high[i] = std::max(p.high[i], s.raw[i]);
    }
  }
  p.source = std::move(source);
  p.count = summaries.size();
  return p;
}

NeuronProfile profile_dataset(const nn::ModelGraph& graph, const std::vector<Image>& images,
                              std::string source) {
  if (images.empty()) throw ArgumentError("cannot profile an empty dataset");
  std::vector<ActivationSummary> summaries;
  summaries.reserve(images.size());
  for (const auto& img : images)
    summaries.push_back(summarize_trace(nn::forward_with_trace(graph, img).trace));
  return profile_summaries(summaries, std::move(source));
}

void save_profile(const NeuronProfile& profile, const std::filesystem::path& path) {
  json j;
  j["source"] = profile.source;
  j["count"] = profile.count;
  json neurons = json::object();
  for (std::size_t i = 0; i < profile.size(); ++i)
    neurons[profile.neurons[i].key()] = {profile.low[i], profile.high[i]};
  j["neurons"] = neurons;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write profile " + path.string());
  out << j.dump(1) << '\n';
}

NeuronProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open profile " + path.string());
  NeuronProfile p;
  try {
    const json j = json::parse(in);
    p.source = j.at("source").get<std::string>();
    p.count = j.at("count").get<std::size_t>();
    std::vector<std::pair<NeuronId, std::pair<double, double>>> entries;
    for (const auto& [key, range] : j.at("neurons").items())
      entries.push_back({NeuronId::from_key(key), {range.at(0).get<double>(), range.at(1).get<double>()}});
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [id, range] : entries) {
      if (range.first > range.second) throw FormatError("profile has low > high for " + id.key());
      p.neurons.push_back(id);
      p.low.push_back(range.first);
      p.high.push_back(range.second);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad profile JSON: ") + e.what());
  }
  return p;
}

std::string to_string(Metric m) {
  switch (m) {
    case Metric::nc: return "nc";
    case Metric::nbc: return "nbc";
    case Metric::snac: return "snac";
  }
  return "?";
}

namespace {

std::size_t count(const NeuronMask& m) {
  return static_cast<std::size_t>(std::count(m.begin(), m.end(), true));
}

double ratio_of(Metric kind, const NeuronMask& covered, const NeuronMask& lower) {
  const double n = static_cast<double>(covered.size());
  if (n == 0) return 0.0;
  switch (kind) {
    case Metric::nc:
    case Metric::snac:
      return static_cast<double>(count(covered)) / n;
    case Metric::nbc:
      return static_cast<double>(count(covered) + count(lower)) / (2.0 * n);
  }
  return 0.0;
}

void check_profile(const ActivationSummary& summary, const NeuronProfile* profile) {
  if (profile == nullptr) throw ArgumentError("NBC/SNAC need a neuron profile");
  if (profile->neurons != summary.neurons)
    throw ArgumentError("profile neurons do not match the activation summary");
}

}  // namespace

CoverageResult single_input_coverage(Metric kind, const ActivationSummary& summary,
                                     const NeuronProfile* profile, std::optional<double> t) {
  CoverageResult r;
  r.kind = kind;
  const std::size_t n = summary.size();
  r.covered.assign(n, false);
  if (kind == Metric::nc) {
    if (!t) throw ArgumentError("NC needs a threshold");
    r.threshold = *t;
    for (std::size_t i = 0; i < n; ++i) r.covered[i] = summary.scaled[i] > *t;
  } else {
    check_profile(summary, profile);
    for (std::size_t i = 0; i < n; ++i) r.covered[i] = summary.raw[i] > profile->high[i];
    if (kind == Metric::nbc) {
      r.lower.assign(n, false);
      for (std::size_t i = 0; i < n; ++i) r.lower[i] = summary.raw[i] < profile->low[i];
    }
  }
  r.ratio = ratio_of(kind, r.covered, r.lower);
  return r;
}

CoverageState::CoverageState(Metric kind, std::size_t neuron_count, double threshold)
    : kind_(kind),
      threshold_(threshold),
      covered_(neuron_count, false),
      lower_(kind == Metric::nbc ? neuron_count : 0, false) {}

double CoverageState::ratio() const noexcept { return ratio_of(kind_, covered_, lower_); }

void CoverageState::add(const CoverageResult& r) {
  if (r.kind != kind_) throw ArgumentError("coverage kind mismatch: " + to_string(r.kind) +
                                           " into " + to_string(kind_));
  if (kind_ == Metric::nc && r.threshold != threshold_)
    throw ArgumentError("NC threshold mismatch");
  if (r.covered.size() != covered_.size() || r.lower.size() != lower_.size())
    throw ArgumentError("coverage result has a different neuron count");
  for (std::size_t i = 0; i < covered_.size(); ++i)
    if (r.covered[i]) covered_[i] = true;
  for (std::size_t i = 0; i < lower_.size(); ++i)
    if (r.lower[i]) lower_[i] = true;
  ++inputs_;
}

void CoverageState::merge(const CoverageState& other) {
  if (other.kind_ != kind_ || other.threshold_ != threshold_ ||
      other.covered_.size() != covered_.size())
    throw ArgumentError("cannot merge coverage states of different kinds");
  for (std::size_t i = 0; i < covered_.size(); ++i)
    if (other.covered_[i]) covered_[i] = true;
  for (std::size_t i = 0; i < lower_.size(); ++i)
    if (other.lower_[i]) lower_[i] = true;
  inputs_ += other.inputs_;
}

CoverageState accumulate_coverage(CoverageState state, const CoverageResult& result) {
  state.add(result);
  return state;
}

std::string to_string(MetricSelection m) {
  switch (m) {
    case MetricSelection::none: return "none";
    case MetricSelection::nc: return "nc";
    case MetricSelection::snac: return "snac";
    case MetricSelection::nbc: return "nbc";
    case MetricSelection::nbc_snac: return "nbc+snac";
  }
  return "?";
}

MetricSelection metric_selection_from_string(const std::string& s) {
  for (auto m : {MetricSelection::none, MetricSelection::nc, MetricSelection::snac,
                 MetricSelection::nbc, MetricSelection::nbc_snac})
    if (to_string(m) == s) return m;
  throw ArgumentError("unknown metric selection '" + s + "' (none, nc, snac, nbc, nbc+snac)");
}

namespace {

bool increases(Metric kind, const ActivationSummary& orig, const ActivationSummary& mut,
               const NeuronProfile* profile, double t) {
  const auto a = single_input_coverage(kind, orig, profile, t);
  const auto b = single_input_coverage(kind, mut, profile, t);
  return a.ratio < b.ratio;
}

}  // namespace

bool coverage_increase(MetricSelection selection, const ActivationSummary& orig,
                       const ActivationSummary& mut, const NeuronProfile* profile,
                       double t_single, Combine combine) {
  switch (selection) {
    case MetricSelection::none:
      return true;
    case MetricSelection::nc:
      return increases(Metric::nc, orig, mut, profile, t_single);
    case MetricSelection::snac:
      return increases(Metric::snac, orig, mut, profile, t_single);
    case MetricSelection::nbc:
      return increases(Metric::nbc, orig, mut, profile, t_single);
    case MetricSelection::nbc_snac: {
      const bool nbc = increases(Metric::nbc, orig, mut, profile, t_single);
      const bool snac = increases(Metric::snac, orig, mut, profile, t_single);
      return combine == Combine::conjunction ? (nbc && snac) : (nbc || snac);
    }
  }
  return false;
}

std::vector<std::pair<std::string, double>> selection_ratios(MetricSelection selection,
                                                             const ActivationSummary& summary,
                                                             const NeuronProfile* profile,
                                                             double t_single) {
  std::vector<Metric> kinds;
  switch (selection) {
    case MetricSelection::none: break;
    case MetricSelection::nc: kinds = {Metric::nc}; break;
    case MetricSelection::snac: kinds = {Metric::snac}; break;
    case MetricSelection::nbc: kinds = {Metric::nbc}; break;
    case MetricSelection::nbc_snac: kinds = {Metric::snac, Metric::nbc}; break;
  }
  std::vector<std::pair<std::string, double>> out;
  for (Metric k : kinds)
    out.emplace_back(to_string(k), single_input_coverage(k, summary, profile, t_single).ratio);
  return out;
}

}  // namespace cgt::coverage
