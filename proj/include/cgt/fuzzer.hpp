#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "cgt/coverage.hpp"
#include "cgt/dataset.hpp"
#include "cgt/mutation.hpp"
#include "cgt/nn.hpp"

namespace cgt::fuzz {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Dataset split

/// Corruption grid over clean_test; images are produced on demand from
/// (clean image, kind, severity, derive(seed, id)).
struct CorruptionGrid {
  std::vector<mutate::Corruption> kinds{mutate::kCorruptions.begin(), mutate::kCorruptions.end()};
  std::vector<int> severities{1, 2, 3, 4, 5};
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return kinds.size() * severities.size(); }
  std::uint64_t image_seed(const std::string& id) const;
};

void to_json(nlohmann::json& j, const CorruptionGrid& g);
void from_json(const nlohmann::json& j, CorruptionGrid& g);

/// Manifests are stored relative to `dir`; every Dataset below uses it as base.
struct DatasetSplit {
  fs::path dir;
  data::Dataset new_train_val;
  data::Dataset cgt_data;
  data::Dataset clean_test;
  data::Dataset adv_test;      // same ids/boxes as clean_test, adversarial pixels
  data::Dataset cgt_adv;       // adversarial counterparts of cgt_data (may be empty)
  data::Dataset natural_test;  // one fixed natural mutant per clean_test image
  CorruptionGrid corruptions;
  std::uint64_t seed = 0;

  bool has_adversarial() const noexcept { return !adv_test.entries.empty(); }
};

struct SplitOptions {
  std::uint64_t seed = 0;
  std::optional<fs::path> adv_source;  // `<adv_source>/<id>.png`
  CorruptionGrid corruptions{};
  mutate::MutationParams natural_params{};
};

/// Seeded 2:1 split of train_val; writes manifests, the natural test set and
/// `split.json` under `out_dir`. Throws IncompletePairingError when
/// `adv_source` lacks a test id.
DatasetSplit split_dataset(const data::Dataset& train_val, const data::Dataset& test,
                           const fs::path& out_dir, const SplitOptions& options);

/// Links `<adv_source>/<id>.png` to every clean_test id (required) and to
/// every cgt_data id that has a file (optional), then rewrites the split.
void attach_adversarial(DatasetSplit& split, const fs::path& adv_source);

DatasetSplit load_split(const fs::path& dir);
void save_split(const DatasetSplit& split);

/// Number of train_val images assigned to new_train_val.
std::size_t train_share(std::size_t n);

// ---------------------------------------------------------------------------
// Bug predicate

enum class Verdict { bug, not_bug, skipped };

/// Ratio test ap_mut / ap_orig <= alpha combined with the coverage gate;
/// skipped when ap_orig <= 0.
Verdict is_bug(double ap_orig, double ap_mut, bool cov_check, double alpha_map);

// ---------------------------------------------------------------------------
// Configuration

struct FuzzConfig {
  double alpha_map = 0.6;
  coverage::MetricSelection metric = coverage::MetricSelection::none;
  coverage::Combine combine = coverage::Combine::conjunction;
  double t_single = 0.5;
  int n_rounds_stage1 = 3;
  int n_samples = 200;
  int n_rounds_stage2 = 5;
  int adv_rounds = 3;
  int adv_samples = 100;
  mutate::MutationParams mutation{};
  std::uint64_t seed = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const FuzzConfig& c);
void from_json(const nlohmann::json& j, FuzzConfig& c);

// ---------------------------------------------------------------------------
// Bugs

enum class Stage { stage1, stage2, adversarial };
std::string to_string(Stage s);
Stage stage_from_string(const std::string& s);

struct Bug {
  std::string original_id;
  std::string original_path;  // relative to the store directory when possible
  Boxes original_boxes;
  std::string mutant_path;    // relative to the store directory
  Boxes mutant_boxes;
  double ap_orig = 0;
  double ap_mut = 0;
  double ratio = 0;
  std::vector<std::pair<std::string, double>> coverage_before;
  std::vector<std::pair<std::string, double>> coverage_after;
  Stage stage = Stage::stage1;
  int round = 0;
  std::string parent;  // stage 2: hash of the stage-1 bug that was re-mutated
  std::optional<mutate::MutationRecord> mutation;
  std::string source_tag;  // adversarial: origin of the adversarial file
  std::string hash;        // image_hash of the stored mutant
};

void to_json(nlohmann::json& j, const Bug& b);
void from_json(const nlohmann::json& j, Bug& b);

/// Append-only bug collection journaled to `<dir>/bugs.jsonl`; mutants live in
/// `<dir>/mutants/<hash>.png`.
class BugStore {
 public:
  /// Opens (and replays) an existing journal or starts an empty one.
  explicit BugStore(fs::path dir);

  const fs::path& dir() const noexcept { return dir_; }
  const std::vector<Bug>& bugs() const noexcept { return bugs_; }
  std::size_t size() const noexcept { return bugs_.size(); }
  bool contains(const std::string& hash) const { return hashes_.contains(hash); }
  std::vector<Bug> by_stage(Stage s) const;

  /// Writes the mutant and journals the bug; false (and no effect) on a duplicate hash.
  bool add(Bug bug, const Image& mutant, const fs::path& original_path);

  fs::path resolve(const std::string& stored_path) const;

 private:
  fs::path dir_;
  std::vector<Bug> bugs_;
  std::unordered_set<std::string> hashes_;
};

// ---------------------------------------------------------------------------
// Fuzzing loops

struct RoundReport {
  Stage stage = Stage::stage1;
  int round = 0;
  int sampled = 0;
  int rejected = 0;  // mutation discarded by the acceptance test
  int skipped = 0;   // ap_orig == 0
  int evaluated = 0;
  int bugs = 0;
  int duplicates = 0;
};

struct RoundReports {
  std::vector<RoundReport> rounds;
  std::vector<std::string> warnings;

  int total_bugs() const;
};

void to_json(nlohmann::json& j, const RoundReport& r);

/// Model plus the neuron profile used by the boundary metrics.
struct Target {
  const nn::ModelGraph* model = nullptr;
  const coverage::NeuronProfile* profile = nullptr;
};

/// AP and activation summary of one image.
struct ImageEval {
  double ap = 0;
  coverage::ActivationSummary summary;
};

ImageEval evaluate_image(const nn::ModelGraph& model, const Image& image, const Boxes& gts);

RoundReports run_stage1(const Target& target, const DatasetSplit& split, const FuzzConfig& config,
                        BugStore& store);
RoundReports run_stage2(const Target& target, const FuzzConfig& config, BugStore& store);
RoundReports run_adversarial(const Target& target, const DatasetSplit& split,
                             const FuzzConfig& config, BugStore& store);

/// new_train_val plus original and mutant of every bug; ids deduplicated,
/// order = new_train_val, then bugs in journal order. Paths relative to the
/// manifest's directory.
data::Manifest build_retrain_set(const DatasetSplit& split, const BugStore& store,
                                 const fs::path& manifest_path);

}  // namespace cgt::fuzz
