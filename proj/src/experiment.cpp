#include "cgt/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>

#include <spdlog/spdlog.h>

#include "cgt/image_io.hpp"
#include "cgt/mutation.hpp"
#include "cgt/synth.hpp"

namespace cgt::eval {

void to_json(nlohmann::json& j, const EvalScores& s) {
  j = nlohmann::json{{"map_clean", s.map_clean},     {"map_adv", s.map_adv}, {"map_natural", s.map_natural},
                     {"mpc", s.mpc},                 {"rpc", s.rpc},
                     {"corruption_maps", s.corruption_maps}};
}

void from_json(const nlohmann::json& j, EvalScores& s) {
  s.map_clean = j.at("map_clean").get<double>();
  s.map_adv = j.at("map_adv").get<double>();
  s.map_natural = j.at("map_natural").get<double>();
  s.mpc = j.at("mpc").get<double>();
  s.rpc = j.at("rpc").get<double>();
  s.corruption_maps = j.at("corruption_maps").get<std::map<std::string, double>>();
}

}  // namespace cgt::eval

namespace cgt::experiment {

using json = nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Runs the model over a set, collecting detections and (optionally) NC states.
class Scan {
 public:
  Scan(const nn::ModelGraph& model, bool coverage) : model_(model), coverage_(coverage) {
    if (coverage_)
      for (double t : kNcThresholds) states_.emplace_back(coverage::Metric::nc, model.neuron_count(), t);
  }

  void add(const Image& image, const Boxes& gts) {
    auto fwd = nn::forward_with_trace(model_, image);
    results_.push_back(eval::ImageResult{nn::decode_and_nms(fwd.raw, model_), gts});
    if (!coverage_) return;
    const auto summary = coverage::summarize_trace(fwd.trace);
    for (std::size_t i = 0; i < states_.size(); ++i)
      states_[i].add(coverage::single_input_coverage(coverage::Metric::nc, summary, nullptr,
                                                     kNcThresholds[i]));
  }

  double map() const { return eval::pooled_average_precision(results_); }
  void reset_results() { results_.clear(); }

  NcRow nc_row(std::string name) const {
    NcRow r{std::move(name), {}};
    for (std::size_t i = 0; i < states_.size(); ++i) r.nc[i] = states_[i].ratio();
    return r;
  }

 private:
  const nn::ModelGraph& model_;
  bool coverage_;
  std::vector<coverage::CoverageState> states_;
  std::vector<eval::ImageResult> results_;
};

double scan_dataset(Scan& scan, const data::Dataset& ds) {
  for (const auto& e : ds.entries) scan.add(ds.load_image(e), e.boxes);
  return scan.map();
}

std::string format_alpha(double a) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", a);
  return buf;
}

void write_json(const json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("bad JSON in " + path.string() + ": " + e.what());
  }
}

double rel(double v, double base) { return base > 0 ? eval::relative_change(v, base) : kNaN; }

}  // namespace

// ---------------------------------------------------------------------------
// Evaluation

void to_json(json& j, const NcRow& r) { j = json{{"set", r.set}, {"nc", r.nc}}; }

void from_json(const json& j, NcRow& r) {
  r.set = j.at("set").get<std::string>();
  r.nc = j.at("nc").get<std::array<double, 3>>();
}

double dataset_map(const nn::ModelGraph& model, const data::Dataset& ds) {
  Scan scan(model, false);
  return scan_dataset(scan, ds);
}

Evaluation evaluate_model(const nn::ModelGraph& model, const fuzz::DatasetSplit& split,
                          const EvalOptions& options) {
  Evaluation ev;
  auto& s = ev.scores;
  {
    Scan scan(model, options.coverage);
    s.map_clean = scan_dataset(scan, split.clean_test);
    if (options.coverage) ev.nc.push_back(scan.nc_row("clean"));
  }
  if (options.natural && !split.natural_test.entries.empty()) {
    Scan scan(model, options.coverage);
    s.map_natural = scan_dataset(scan, split.natural_test);
    if (options.coverage) ev.nc.push_back(scan.nc_row("natural"));
  }
  if (options.adversarial && split.has_adversarial()) {
    Scan scan(model, options.coverage);
    s.map_adv = scan_dataset(scan, split.adv_test);
    if (options.coverage) ev.nc.push_back(scan.nc_row("adversarial"));
  }
  if (options.corruptions && split.corruptions.size() > 0) {
    const auto& grid = split.corruptions;
    std::vector<Image> clean;
    for (const auto& e : split.clean_test.entries) clean.push_back(split.clean_test.load_image(e));
    Scan scan(model, options.coverage);  // coverage accumulates over the whole grid
    std::vector<double> maps;
    for (auto kind : grid.kinds)
      for (int sev : grid.severities) {
        scan.reset_results();
        for (std::size_t i = 0; i < clean.size(); ++i) {
          const auto& e = split.clean_test.entries[i];
          scan.add(mutate::apply_corruption(clean[i], kind, sev, grid.image_seed(e.id)), e.boxes);
        }
        const double m = scan.map();
        maps.push_back(m);
        s.corruption_maps[mutate::to_string(kind) + "/" + std::to_string(sev)] = m;
      }
    if (s.map_clean > 0) {
      const auto cs = eval::corruption_scores(maps, s.map_clean);
      s.mpc = cs.mpc;
      s.rpc = cs.rpc;
    } else {
      double sum = 0;
      for (double m : maps) sum += m;
      s.mpc = sum / static_cast<double>(maps.size());
      s.rpc = 0;
    }
    if (options.coverage) ev.nc.push_back(scan.nc_row("corruptions"));
  }
  return ev;
}

// ---------------------------------------------------------------------------
// Plan

std::string to_string(Mode m) { return m == Mode::natural ? "natural" : "adversarial"; }

Mode mode_from_string(const std::string& s) {
  if (s == "natural") return Mode::natural;
  if (s == "adversarial") return Mode::adversarial;
  throw ArgumentError("mode must be 'natural' or 'adversarial', got '" + s + "'");
}

std::string PlanCell::name() const { return coverage::to_string(metric) + "_a" + format_alpha(alpha_map); }

ExperimentPlan ExperimentPlan::default_grid(Mode mode, std::uint64_t seed) {
  using coverage::MetricSelection;
  ExperimentPlan p;
  p.mode = mode;
  p.seed = seed;
  for (double a : {0.6, 0.3})
    for (auto m : {MetricSelection::none, MetricSelection::nc, MetricSelection::snac, MetricSelection::nbc,
                   MetricSelection::nbc_snac})
      p.cells.push_back(PlanCell{m, a});
  return p;
}

void ExperimentPlan::validate() const {
  std::set<std::string> names;
  for (const auto& c : cells) {
    if (!(c.alpha_map > 0 && c.alpha_map <= 1)) throw ArgumentError("alpha_map must be in (0, 1]");
    if (!names.insert(c.name()).second) throw ArgumentError("duplicate plan cell " + c.name());
  }
}

void to_json(json& j, const ExperimentPlan& p) {
  json cells = json::array();
  for (const auto& c : p.cells)
    cells.push_back({{"metric", coverage::to_string(c.metric)}, {"alpha_map", c.alpha_map}});
  j = json{{"mode", to_string(p.mode)}, {"seed", p.seed}, {"cells", cells}};
}

void from_json(const json& j, ExperimentPlan& p) {
  p.mode = mode_from_string(j.value("mode", std::string("natural")));
  p.seed = j.value("seed", std::uint64_t{1});
  p.cells.clear();
  if (!j.contains("cells")) {
    p.cells = ExperimentPlan::default_grid(p.mode, p.seed).cells;
    return;
  }
  for (const auto& c : j.at("cells"))
    p.cells.push_back(PlanCell{coverage::metric_selection_from_string(c.at("metric").get<std::string>()),
                               c.at("alpha_map").get<double>()});
}

void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"train", c.train},
           {"fuzz", c.fuzz},
           {"eval",
            {{"natural", c.eval.natural},
             {"adversarial", c.eval.adversarial},
             {"corruptions", c.eval.corruptions}}},
           {"validation_images", c.validation_images}};
}

void from_json(const json& j, ExperimentConfig& c) {
  const ExperimentConfig d;
  c.train = j.contains("train") ? j.at("train").get<train::TrainConfig>() : d.train;
  c.fuzz = j.contains("fuzz") ? j.at("fuzz").get<fuzz::FuzzConfig>() : d.fuzz;
  c.eval = d.eval;
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    c.eval.natural = e.value("natural", d.eval.natural);
    c.eval.adversarial = e.value("adversarial", d.eval.adversarial);
    c.eval.corruptions = e.value("corruptions", d.eval.corruptions);
  }
  c.validation_images = j.value("validation_images", d.validation_images);
}

// ---------------------------------------------------------------------------
// Training steps

train::ValidationFn validation_fn(const fuzz::DatasetSplit& split, int n) {
  if (n <= 0 || split.cgt_data.entries.empty()) return {};
  data::Dataset val;
  val.base_dir = split.cgt_data.base_dir;
  const auto count = std::min<std::size_t>(static_cast<std::size_t>(n), split.cgt_data.size());
  val.entries.assign(split.cgt_data.entries.begin(),
                     split.cgt_data.entries.begin() + static_cast<std::ptrdiff_t>(count));
  auto samples = std::make_shared<std::vector<train::Sample>>(data::load_samples(val));
  return [samples](const nn::ModelGraph& m) {
    std::vector<eval::ImageResult> r;
    for (const auto& s : *samples) r.push_back({nn::detect(m, s.image), s.boxes});
    return eval::pooled_average_precision(r);
  };
}

nn::ModelGraph train_baseline(const fuzz::DatasetSplit& split, const train::TrainConfig& config,
                              const fs::path& out_dir, int validation_images) {
  config.validate();
  if (split.new_train_val.entries.empty()) throw ArgumentError("new_train_val is empty");
  nn::ModelGraph g = nn::person_mini();
  train::init_weights(g, config.seed);
  const auto samples = data::load_samples(split.new_train_val);
  std::vector<train::EpochLog> log;
  g = train::train(std::move(g), samples, config, &log, validation_fn(split, validation_images));
  fs::create_directories(out_dir);
  nn::save_model(g, out_dir / "model.sdnm");
  write_json(json{{"config", config}, {"hash", config.hash()}}, out_dir / "train_config.json");
  train::write_training_log(log, (out_dir / "train_log.csv").string());
  return g;
}

train::TrainConfig load_train_config(const fs::path& path) {
  if (!fs::exists(path)) throw OrchestrationError("baseline training config missing: " + path.string());
  const json j = read_json(path);
  auto c = j.at("config").get<train::TrainConfig>();
  if (j.contains("hash") && j.at("hash").get<std::string>() != c.hash())
    throw IntegrityError("training config hash mismatch in " + path.string());
  return c;
}

nn::ModelGraph retrain(const nn::ModelGraph& baseline, std::span<const train::Sample> samples,
                       const train::TrainConfig& config, const train::TrainConfig& baseline_config,
                       std::vector<train::EpochLog>* log, const train::ValidationFn& validate) {
  if (config.hash() != baseline_config.hash())
    throw ArgumentError("retraining must reuse the baseline training config (hash " +
                        baseline_config.hash() + ", got " + config.hash() + ")");
  nn::ModelGraph g = baseline;
  if (config.retrain_from_scratch) train::init_weights(g, config.seed);
  return train::train(std::move(g), samples, config, log, validate);
}

// ---------------------------------------------------------------------------
// Experiment

Changes relative_changes(const eval::EvalScores& cell, const eval::EvalScores& base) {
  Changes c;
  c.clean = rel(cell.map_clean, base.map_clean);
  c.natural = rel(cell.map_natural, base.map_natural);
  c.adversarial = rel(cell.map_adv, base.map_adv);
  c.mpc = rel(cell.mpc, base.mpc);
  c.rpc = rel(cell.rpc, base.rpc);
  return c;
}

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

void to_json(json& j, const CellResult& c) {
  j = json{{"metric", coverage::to_string(c.cell.metric)},
           {"alpha_map", c.cell.alpha_map},
           {"stage1_bugs", c.stage1_bugs},
           {"stage2_bugs", c.stage2_bugs},
           {"adversarial_bugs", c.adversarial_bugs},
           {"retrain_size", c.retrain_size},
           {"scores", c.scores},
           {"change",
            {{"clean", number_or_null(c.change.clean)},
             {"natural", number_or_null(c.change.natural)},
             {"adversarial", number_or_null(c.change.adversarial)},
             {"mpc", number_or_null(c.change.mpc)},
             {"rpc", number_or_null(c.change.rpc)}}}};
}

namespace {

double number_or_nan(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

}  // namespace

void from_json(const json& j, CellResult& c) {
  c.cell.metric = coverage::metric_selection_from_string(j.at("metric").get<std::string>());
  c.cell.alpha_map = j.at("alpha_map").get<double>();
  c.stage1_bugs = j.at("stage1_bugs").get<int>();
  c.stage2_bugs = j.at("stage2_bugs").get<int>();
  c.adversarial_bugs = j.at("adversarial_bugs").get<int>();
  c.retrain_size = j.at("retrain_size").get<std::size_t>();
  c.scores = j.at("scores").get<eval::EvalScores>();
  const auto& d = j.at("change");
  c.change = Changes{number_or_nan(d.at("clean")), number_or_nan(d.at("natural")),
                     number_or_nan(d.at("adversarial")), number_or_nan(d.at("mpc")),
                     number_or_nan(d.at("rpc"))};
}

void from_json(const json& j, ExperimentResult& r) {
  r.mode = mode_from_string(j.at("mode").get<std::string>());
  r.seed = j.at("seed").get<std::uint64_t>();
  r.baseline = j.at("baseline").get<eval::EvalScores>();
  r.baseline_nc = j.at("baseline_nc").get<std::vector<NcRow>>();
  r.cells = j.at("cells").get<std::vector<CellResult>>();
}

void to_json(json& j, const ExperimentResult& r) {
  j = json{{"mode", to_string(r.mode)},
           {"seed", r.seed},
           {"baseline", r.baseline},
           {"baseline_nc", r.baseline_nc},
           {"cells", r.cells}};
}

coverage::NeuronProfile profile_baseline(const nn::ModelGraph& model, const fuzz::DatasetSplit& split,
                                         const fs::path& out) {
  auto profile = coverage::profile_dataset(model, data::load_images(split.new_train_val), "new_train_val");
  coverage::save_profile(profile, out);
  return profile;
}

void prepare_run(const RunPaths& paths, const PrepareOptions& options, const ExperimentConfig& config) {
  const fs::path tv = paths.data_dir() / "train_val.jsonl";
  const fs::path te = paths.data_dir() / "test.jsonl";
  if (!fs::exists(tv) || !fs::exists(te)) {
    spdlog::info("generating {} + {} synthetic scenes", options.n_train_val, options.n_test);
    synth::generate_synthetic_dataset(options.n_train_val, options.n_test, options.seed, paths.data_dir());
  }
  fuzz::DatasetSplit split;
  if (fs::exists(paths.split_dir() / "split.json")) {
    split = fuzz::load_split(paths.split_dir());
  } else {
    fuzz::SplitOptions so;
    so.seed = options.seed;
    so.corruptions.seed = options.seed;
    so.natural_params = config.fuzz.mutation;
    split = fuzz::split_dataset(data::load_dataset(tv), data::load_dataset(te), paths.split_dir(), so);
  }
  nn::ModelGraph model;
  if (fs::exists(paths.baseline_model())) {
    model = nn::load_model(paths.baseline_model());
  } else {
    spdlog::info("training baseline on {} images", split.new_train_val.size());
    model = train_baseline(split, config.train, paths.baseline_dir(), config.validation_images);
  }
  if (options.adversarial && !split.has_adversarial()) {
    spdlog::info("generating pseudo-adversarial stand-ins");
    adv::PseudoAdvParams ap = options.adv;
    ap.seed = options.seed;
    adv::generate_pseudo_adversarial(model, split.clean_test, paths.adv_dir(), ap);
    adv::generate_pseudo_adversarial(model, split.cgt_data, paths.adv_dir(), ap);
    fuzz::attach_adversarial(split, paths.adv_dir());
  }
  if (!fs::exists(paths.baseline_profile())) profile_baseline(model, split, paths.baseline_profile());
}

namespace {

struct BaselineArtifacts {
  fuzz::DatasetSplit split;
  nn::ModelGraph model;
  train::TrainConfig train;
  coverage::NeuronProfile profile;
};

BaselineArtifacts load_artifacts(const RunPaths& paths) {
  for (const fs::path& p : {paths.split_dir() / "split.json", paths.baseline_model(),
                            paths.baseline_config(), paths.baseline_profile()})
    if (!fs::exists(p)) throw OrchestrationError("missing pipeline artifact: " + p.string());
  return BaselineArtifacts{fuzz::load_split(paths.split_dir()), nn::load_model(paths.baseline_model()),
                           load_train_config(paths.baseline_config()),
                           coverage::load_profile(paths.baseline_profile())};
}

CellResult run_cell_with(const BaselineArtifacts& base, const PlanCell& cell, Mode mode,
                         std::uint64_t seed, const RunPaths& paths, const ExperimentConfig& config) {
  const fs::path dir = paths.cell_dir(cell);
  fs::remove_all(dir);
  fs::create_directories(dir);
  spdlog::info("cell {}: fuzzing ({})", cell.name(), to_string(mode));

  fuzz::FuzzConfig fc = config.fuzz;
  fc.metric = cell.metric;
  fc.alpha_map = cell.alpha_map;
  fc.seed = seed;
  const fuzz::Target target{&base.model, &base.profile};
  fuzz::BugStore store(dir / "bugs");
  CellResult res;
  res.cell = cell;
  json rounds = json::array();
  if (mode == Mode::natural) {
    const auto s1 = fuzz::run_stage1(target, base.split, fc, store);
    const auto s2 = fuzz::run_stage2(target, fc, store);
    res.stage1_bugs = s1.total_bugs();
    res.stage2_bugs = s2.total_bugs();
    for (const auto& r : s1.rounds) rounds.push_back(r);
    for (const auto& r : s2.rounds) rounds.push_back(r);
  } else {
    const auto a = fuzz::run_adversarial(target, base.split, fc, store);
    res.adversarial_bugs = a.total_bugs();
    for (const auto& r : a.rounds) rounds.push_back(r);
  }
  write_json(json{{"config", fc}, {"rounds", rounds}}, dir / "fuzz.json");

  const fs::path manifest = dir / "retrain.jsonl";
  fuzz::build_retrain_set(base.split, store, manifest);
  const data::Dataset retrain_set = data::load_dataset(manifest);
  res.retrain_size = retrain_set.size();
  spdlog::info("cell {}: {} bugs, retraining on {} images", cell.name(), res.bugs(), res.retrain_size);

  const auto samples = data::load_samples(retrain_set);
  std::vector<train::EpochLog> log;
  const nn::ModelGraph model = retrain(base.model, samples, config.train, base.train, &log,
                                       validation_fn(base.split, config.validation_images));
  nn::save_model(model, dir / "model.sdnm");
  train::write_training_log(log, (dir / "train_log.csv").string());

  EvalOptions eo = config.eval;
  eo.coverage = false;
  res.scores = evaluate_model(model, base.split, eo).scores;
  write_json(json(res.scores), dir / "eval.json");
  return res;
}

}  // namespace

CellResult run_cell(const PlanCell& cell, Mode mode, std::uint64_t seed, const RunPaths& paths,
                    const ExperimentConfig& config) {
  return run_cell_with(load_artifacts(paths), cell, mode, seed, paths, config);
}

ExperimentResult run_experiment(const ExperimentPlan& plan, const RunPaths& paths,
                                const ExperimentConfig& config) {
  plan.validate();
  config.train.validate();
  config.fuzz.validate();
  const BaselineArtifacts base = load_artifacts(paths);
  if (plan.mode == Mode::adversarial && base.split.cgt_adv.entries.empty())
    throw OrchestrationError("adversarial plan but the split has no adversarial pairs");

  ExperimentResult out;
  out.mode = plan.mode;
  out.seed = plan.seed;
  EvalOptions eo = config.eval;
  eo.coverage = true;
  spdlog::info("evaluating baseline");
  const Evaluation be = evaluate_model(base.model, base.split, eo);
  out.baseline = be.scores;
  out.baseline_nc = be.nc;
  write_json(json{{"scores", be.scores}, {"nc", be.nc}}, paths.baseline_eval());

  for (const auto& cell : plan.cells) {
    CellResult r = run_cell_with(base, cell, plan.mode, plan.seed, paths, config);
    r.change = relative_changes(r.scores, out.baseline);
    out.cells.push_back(std::move(r));
  }
  write_json(json(out), paths.run_dir / "experiment.json");
  return out;
}

}  // namespace cgt::experiment
