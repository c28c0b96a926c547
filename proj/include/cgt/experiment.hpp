#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgt/coverage.hpp"
#include "cgt/det_eval.hpp"
#include "cgt/fuzzer.hpp"
#include "cgt/nn.hpp"
#include "cgt/pseudo_adv.hpp"
#include "cgt/training.hpp"

namespace cgt::eval {
void to_json(nlohmann::json& j, const EvalScores& s);
void from_json(const nlohmann::json& j, EvalScores& s);
}  // namespace cgt::eval

namespace cgt::experiment {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Evaluation

inline constexpr std::array<double, 3> kNcThresholds = {0.25, 0.5, 0.75};

/// Accumulated NC of one image set at each of kNcThresholds, as fractions.
struct NcRow {
  std::string set;
  std::array<double, 3> nc{};
};

struct EvalOptions {
  bool natural = true;
  bool adversarial = true;  // ignored when the split has no adversarial pairs
  bool corruptions = true;
  bool coverage = false;    // fill Evaluation::nc
};

struct Evaluation {
  eval::EvalScores scores;
  std::vector<NcRow> nc;  // clean, natural, adversarial, corruptions (present sets only)
};

void to_json(nlohmann::json& j, const NcRow& r);
void from_json(const nlohmann::json& j, NcRow& r);

/// Pooled mAP_50 of a dataset.
double dataset_map(const nn::ModelGraph& model, const data::Dataset& ds);

/// Clean, natural, adversarial and corruption-grid scores on the split's test side.
/// Scores of absent sets are left at 0; rpc is 0 when map_clean is 0.
Evaluation evaluate_model(const nn::ModelGraph& model, const fuzz::DatasetSplit& split,
                          const EvalOptions& options);

// ---------------------------------------------------------------------------
// Plan and configuration

enum class Mode { natural, adversarial };
std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

struct PlanCell {
  coverage::MetricSelection metric = coverage::MetricSelection::none;
  double alpha_map = 0.6;

  std::string name() const;  // e.g. "nbc+snac_a0.30"
  bool operator==(const PlanCell&) const = default;
};

struct ExperimentPlan {
  std::vector<PlanCell> cells;
  Mode mode = Mode::natural;
  std::uint64_t seed = 1;

  /// {none, nc, snac, nbc, nbc+snac} x {0.6, 0.3}.
  static ExperimentPlan default_grid(Mode mode = Mode::natural, std::uint64_t seed = 1);
  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentPlan& p);
void from_json(const nlohmann::json& j, ExperimentPlan& p);

/// Everything tunable besides the plan. Cell metric/alpha/seed override `fuzz`.
struct ExperimentConfig {
  train::TrainConfig train{};
  fuzz::FuzzConfig fuzz{};
  EvalOptions eval{};
  int validation_images = 64;  // cgt_data prefix scored after every epoch; 0 disables
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

// ---------------------------------------------------------------------------
// Run directory

struct RunPaths {
  fs::path run_dir;

  fs::path data_dir() const { return run_dir / "data"; }
  fs::path split_dir() const { return run_dir / "split"; }
  fs::path adv_dir() const { return run_dir / "adv"; }
  fs::path baseline_dir() const { return run_dir / "baseline"; }
  fs::path baseline_model() const { return baseline_dir() / "model.sdnm"; }
  fs::path baseline_config() const { return baseline_dir() / "train_config.json"; }
  fs::path baseline_profile() const { return baseline_dir() / "profile.json"; }
  fs::path baseline_eval() const { return baseline_dir() / "eval.json"; }
  fs::path cell_dir(const PlanCell& c) const { return run_dir / "cells" / c.name(); }
  fs::path report_dir() const { return run_dir / "report"; }
};

// ---------------------------------------------------------------------------
// Training steps

/// Validation callback over the first `n` cgt_data images (empty when n <= 0).
train::ValidationFn validation_fn(const fuzz::DatasetSplit& split, int n);

/// Seeded init + train on new_train_val; writes model, config (with hash) and log to `out_dir`.
nn::ModelGraph train_baseline(const fuzz::DatasetSplit& split, const train::TrainConfig& config,
                              const fs::path& out_dir, int validation_images = 64);

/// Reads the baseline's recorded TrainConfig; OrchestrationError when absent.
train::TrainConfig load_train_config(const fs::path& path);

/// Fine-tunes `baseline` (or trains from a fresh init when the config says so)
/// on `samples`. Throws ArgumentError unless `config` hashes like `baseline_config`.
nn::ModelGraph retrain(const nn::ModelGraph& baseline, std::span<const train::Sample> samples,
                       const train::TrainConfig& config, const train::TrainConfig& baseline_config,
                       std::vector<train::EpochLog>* log = nullptr,
                       const train::ValidationFn& validate = {});

// ---------------------------------------------------------------------------
// Experiment

/// Relative changes in percent; NaN where the baseline value is 0.
struct Changes {
  double clean = 0, natural = 0, adversarial = 0, mpc = 0, rpc = 0;
};

Changes relative_changes(const eval::EvalScores& cell, const eval::EvalScores& base);

struct CellResult {
  PlanCell cell;
  int stage1_bugs = 0;
  int stage2_bugs = 0;
  int adversarial_bugs = 0;
  std::size_t retrain_size = 0;
  eval::EvalScores scores;
  Changes change;

  int bugs() const { return stage1_bugs + stage2_bugs + adversarial_bugs; }
};

struct ExperimentResult {
  Mode mode = Mode::natural;
  std::uint64_t seed = 0;
  eval::EvalScores baseline;
  std::vector<NcRow> baseline_nc;
  std::vector<CellResult> cells;
};

void to_json(nlohmann::json& j, const CellResult& c);
void from_json(const nlohmann::json& j, CellResult& c);
void to_json(nlohmann::json& j, const ExperimentResult& r);
void from_json(const nlohmann::json& j, ExperimentResult& r);

/// Profiles the model over new_train_val and saves it.
coverage::NeuronProfile profile_baseline(const nn::ModelGraph& model, const fuzz::DatasetSplit& split,
                                         const fs::path& out);

struct PrepareOptions {
  int n_train_val = 600;
  int n_test = 200;
  std::uint64_t seed = 1;
  bool adversarial = true;  // generate and attach the pseudo-adversarial stand-in
  adv::PseudoAdvParams adv{};
};

/// Creates whatever of data, split, baseline, adversarial set and profile is
/// missing under `paths`; existing artifacts are kept.
void prepare_run(const RunPaths& paths, const PrepareOptions& options, const ExperimentConfig& config);

/// Fuzz one cell against the baseline, build its retrain set, retrain, evaluate.
CellResult run_cell(const PlanCell& cell, Mode mode, std::uint64_t seed, const RunPaths& paths,
                    const ExperimentConfig& config);

/// Requires split, baseline model, its train config and profile (OrchestrationError
/// otherwise). The baseline evaluation is written to the baseline directory.
ExperimentResult run_experiment(const ExperimentPlan& plan, const RunPaths& paths,
                                const ExperimentConfig& config);

}  // namespace cgt::experiment
