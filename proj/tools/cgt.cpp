// Command-line front end. Every artifact lives under --run-dir.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "cgt/coverage.hpp"
#include "cgt/experiment.hpp"
#include "cgt/fuzzer.hpp"
#include "cgt/image_io.hpp"
#include "cgt/pseudo_adv.hpp"
#include "cgt/report.hpp"
#include "cgt/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace cgt;

namespace {

json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot read " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("bad JSON in " + p.string() + ": " + e.what());
  }
}

template <class T>
T parse_json(const json& j, const std::string& what) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw ArgumentError("bad " + what + ": " + e.what());
  }
}

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

struct Globals {
  std::string run_dir = "run";
  std::uint64_t seed = 1;
  std::string config_path;
  std::string log_level = "info";

  experiment::RunPaths paths() const { return {run_dir}; }

  experiment::ExperimentConfig config() const {
    experiment::ExperimentConfig c;
    if (!config_path.empty())
      c = parse_json<experiment::ExperimentConfig>(read_json_file(config_path), "config");
    c.fuzz.seed = seed;
    return c;
  }
};

coverage::NeuronProfile load_profile_for(const experiment::RunPaths& p) {
  if (!fs::exists(p.baseline_profile()))
    throw OrchestrationError("no neuron profile; run `profile` first (" + p.baseline_profile().string() + ")");
  return coverage::load_profile(p.baseline_profile());
}

nn::ModelGraph load_model_for(const experiment::RunPaths& p, const std::string& override_path) {
  const fs::path path = override_path.empty() ? p.baseline_model() : fs::path(override_path);
  if (!fs::exists(path)) throw OrchestrationError("model not found: " + path.string());
  return nn::load_model(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coverage-guided testing harness for a grid person detector"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--run-dir", g.run_dir, "Run directory holding all artifacts")->capture_default_str();
  app.add_option("--seed", g.seed, "Global seed")->capture_default_str();
  app.add_option("--config", g.config_path, "Experiment config JSON (train/fuzz/eval sections)");
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off")->capture_default_str();

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Render the synthetic pedestrian benchmark");
  int n_tv = 600, n_test = 200;
  std::string gen_out;
  gen->add_option("--train-val", n_tv, "Number of train_val scenes")->capture_default_str();
  gen->add_option("--test", n_test, "Number of test scenes")->capture_default_str();
  gen->add_option("--out", gen_out, "Output directory (default <run>/data)");

  // split
  auto* split_cmd = app.add_subcommand("split", "Split train_val 2:1 and prepare the test side");
  std::string split_tv, split_test, split_adv;
  split_cmd->add_option("--train-val", split_tv, "train_val manifest (default <run>/data/train_val.jsonl)");
  split_cmd->add_option("--test", split_test, "test manifest (default <run>/data/test.jsonl)");
  split_cmd->add_option("--adv-source", split_adv, "Directory with <id>.png adversarial counterparts");

  // train-baseline
  auto* train_cmd = app.add_subcommand("train-baseline", "Train the baseline detector on new_train_val");

  // gen-adv
  auto* adv_cmd = app.add_subcommand(
      "gen-adv", "Generate pseudo-adversarial stand-ins for test and cgt images and attach them");
  adv::PseudoAdvParams adv_params;
  adv_cmd->add_option("--epsilon", adv_params.epsilon, "L-inf budget")->capture_default_str();
  adv_cmd->add_option("--iterations", adv_params.iterations, "Random-search steps")->capture_default_str();

  // profile
  auto* profile_cmd = app.add_subcommand("profile", "Profile neuron ranges of the baseline on new_train_val");

  // fuzz
  auto* fuzz_cmd = app.add_subcommand("fuzz", "Run the fuzzing loop against the baseline");
  std::string mode = "natural", metric = "none", fuzz_out;
  double alpha_map = -1;
  fuzz_cmd->add_option("--mode", mode, "natural|adversarial")->capture_default_str();
  fuzz_cmd->add_option("--metric", metric, "none|nc|snac|nbc|nbc+snac")->capture_default_str();
  fuzz_cmd->add_option("--alpha-map", alpha_map, "Bug severity threshold (default from config)");
  fuzz_cmd->add_option("--out", fuzz_out, "Bug store directory (default <run>/fuzz/<metric>_a<alpha>)");

  // build-retrain-set
  auto* brs = app.add_subcommand("build-retrain-set", "new_train_val plus originals and mutants of all bugs");
  std::string brs_bugs, brs_out;
  brs->add_option("--bugs", brs_bugs, "Bug store directory")->required();
  brs->add_option("--out", brs_out, "Output manifest")->required();

  // retrain
  auto* retrain_cmd = app.add_subcommand("retrain", "Retrain from the baseline with its training config");
  std::string rt_manifest, rt_out;
  retrain_cmd->add_option("--manifest", rt_manifest, "Retraining manifest")->required();
  retrain_cmd->add_option("--out", rt_out, "Output model path")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Clean / natural / adversarial / corruption scores");
  std::string eval_model, eval_out;
  bool eval_coverage = false;
  eval_cmd->add_option("--model", eval_model, "Model path (default baseline)");
  eval_cmd->add_option("--out", eval_out, "Write scores JSON here");
  eval_cmd->add_flag("--coverage", eval_coverage, "Also report accumulated NC per set");

  // corrupt
  auto* corrupt_cmd = app.add_subcommand("corrupt", "Materialize corrupted copies of clean_test");
  std::string c_kind, c_out;
  int c_sev = 0;
  corrupt_cmd->add_option("--kind", c_kind, "Corruption kind (default: all)");
  corrupt_cmd->add_option("--severity", c_sev, "1..5 (default: all)");
  corrupt_cmd->add_option("--out", c_out, "Output directory (default <run>/corruptions)");

  // report
  auto* report_cmd = app.add_subcommand("report", "Render CSV and Markdown from experiment.json");
  std::string rep_in, rep_out;
  report_cmd->add_option("--input", rep_in, "Experiment result (default <run>/experiment.json)");
  report_cmd->add_option("--out", rep_out, "Output directory (default <run>/report)");

  // experiment
  auto* exp_cmd = app.add_subcommand("experiment", "Run a plan of (metric, alpha_map) cells end to end");
  std::string plan_path;
  bool prepare = false;
  experiment::PrepareOptions prep;
  exp_cmd->add_option("--plan", plan_path, "Plan JSON (default: the 10-cell natural grid)");
  exp_cmd->add_flag("--prepare", prepare, "Create missing data, split, baseline, adversarial set and profile");
  exp_cmd->add_option("--train-val", prep.n_train_val, "Scenes for --prepare")->capture_default_str();
  exp_cmd->add_option("--test", prep.n_test, "Scenes for --prepare")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    spdlog::set_level(spdlog::level::from_str(g.log_level));
    const auto paths = g.paths();

    if (*gen) {
      const fs::path out = gen_out.empty() ? paths.data_dir() : fs::path(gen_out);
      const auto r = synth::generate_synthetic_dataset(n_tv, n_test, g.seed, out);
      print_json({{"train_val", r.train_val_manifest.string()}, {"test", r.test_manifest.string()}});
    } else if (*split_cmd) {
      fuzz::SplitOptions so;
      so.seed = g.seed;
      so.corruptions.seed = g.seed;
      so.natural_params = g.config().fuzz.mutation;
      if (!split_adv.empty()) so.adv_source = split_adv;
      const auto s = fuzz::split_dataset(
          data::load_dataset(split_tv.empty() ? paths.data_dir() / "train_val.jsonl" : fs::path(split_tv)),
          data::load_dataset(split_test.empty() ? paths.data_dir() / "test.jsonl" : fs::path(split_test)),
          paths.split_dir(), so);
      print_json({{"new_train_val", s.new_train_val.size()},
                  {"cgt_data", s.cgt_data.size()},
                  {"clean_test", s.clean_test.size()},
                  {"adv_test", s.adv_test.size()},
                  {"corruption_grid", s.corruptions.size()}});
    } else if (*train_cmd) {
      const auto cfg = g.config();
      const auto split = fuzz::load_split(paths.split_dir());
      const auto model = experiment::train_baseline(split, cfg.train, paths.baseline_dir(), cfg.validation_images);
      print_json({{"model", paths.baseline_model().string()},
                  {"map_clean", experiment::dataset_map(model, split.clean_test)}});
    } else if (*adv_cmd) {
      auto split = fuzz::load_split(paths.split_dir());
      const auto model = load_model_for(paths, "");
      adv_params.seed = g.seed;
      adv::generate_pseudo_adversarial(model, split.clean_test, paths.adv_dir(), adv_params);
      adv::generate_pseudo_adversarial(model, split.cgt_data, paths.adv_dir(), adv_params);
      fuzz::attach_adversarial(split, paths.adv_dir());
      print_json({{"adv_test", split.adv_test.size()}, {"cgt_adv", split.cgt_adv.size()}});
    } else if (*profile_cmd) {
      const auto split = fuzz::load_split(paths.split_dir());
      const auto p = experiment::profile_baseline(load_model_for(paths, ""), split, paths.baseline_profile());
      print_json({{"profile", paths.baseline_profile().string()}, {"neurons", p.size()}, {"images", p.count}});
    } else if (*fuzz_cmd) {
      auto cfg = g.config().fuzz;
      cfg.metric = coverage::metric_selection_from_string(metric);
      if (alpha_map > 0 || fuzz_cmd->count("--alpha-map")) cfg.alpha_map = alpha_map;
      const auto m = experiment::mode_from_string(mode);
      const auto split = fuzz::load_split(paths.split_dir());
      const auto model = load_model_for(paths, "");
      const auto profile = load_profile_for(paths);
      const experiment::PlanCell cell{cfg.metric, cfg.alpha_map};
      const fs::path out = fuzz_out.empty() ? paths.run_dir / "fuzz" / cell.name() : fs::path(fuzz_out);
      fuzz::BugStore store(out);
      const fuzz::Target target{&model, &profile};
      json rounds = json::array();
      if (m == experiment::Mode::natural) {
        for (const auto& r : fuzz::run_stage1(target, split, cfg, store).rounds) rounds.push_back(r);
        for (const auto& r : fuzz::run_stage2(target, cfg, store).rounds) rounds.push_back(r);
      } else {
        for (const auto& r : fuzz::run_adversarial(target, split, cfg, store).rounds) rounds.push_back(r);
      }
      print_json({{"bug_store", out.string()}, {"bugs", store.size()}, {"rounds", rounds}});
    } else if (*brs) {
      const auto split = fuzz::load_split(paths.split_dir());
      const fuzz::BugStore store(brs_bugs);
      const auto m = fuzz::build_retrain_set(split, store, brs_out);
      print_json({{"manifest", brs_out}, {"images", m.size()}});
    } else if (*retrain_cmd) {
      const auto cfg = g.config();
      const auto base_cfg = experiment::load_train_config(paths.baseline_config());
      const auto split = fuzz::load_split(paths.split_dir());
      const auto samples = data::load_samples(data::load_dataset(rt_manifest));
      std::vector<train::EpochLog> log;
      const auto model = experiment::retrain(load_model_for(paths, ""), samples, cfg.train, base_cfg, &log,
                                             experiment::validation_fn(split, cfg.validation_images));
      nn::save_model(model, rt_out);
      train::write_training_log(log, fs::path(rt_out).replace_extension(".log.csv").string());
      print_json({{"model", rt_out}, {"map_clean", experiment::dataset_map(model, split.clean_test)}});
    } else if (*eval_cmd) {
      auto opts = g.config().eval;
      opts.coverage = eval_coverage;
      const auto split = fuzz::load_split(paths.split_dir());
      const auto ev = experiment::evaluate_model(load_model_for(paths, eval_model), split, opts);
      const json j{{"scores", ev.scores}, {"nc", ev.nc}};
      if (!eval_out.empty()) {
        std::ofstream out(eval_out, std::ios::trunc);
        if (!out) throw IoError("cannot write " + eval_out);
        out << j.dump(2) << '\n';
      }
      print_json(j);
    } else if (*corrupt_cmd) {
      const auto split = fuzz::load_split(paths.split_dir());
      std::vector<mutate::Corruption> kinds = split.corruptions.kinds;
      if (!c_kind.empty()) kinds = {mutate::corruption_from_string(c_kind)};
      std::vector<int> sevs = split.corruptions.severities;
      if (c_sev != 0) {
        mutate::corruption_parameter(mutate::Corruption::pixelate, c_sev);  // range check
        sevs = {c_sev};
      }
      const fs::path out = c_out.empty() ? paths.run_dir / "corruptions" : fs::path(c_out);
      std::size_t n = 0;
      for (const auto& e : split.clean_test.entries) {
        const Image img = split.clean_test.load_image(e);
        for (auto k : kinds)
          for (int s : sevs) {
            const fs::path p = out / mutate::to_string(k) / std::to_string(s) / (e.id + ".png");
            io::write_png(mutate::apply_corruption(img, k, s, split.corruptions.image_seed(e.id)), p);
            ++n;
          }
      }
      print_json({{"out", out.string()}, {"images", n}});
    } else if (*report_cmd) {
      const fs::path in = rep_in.empty() ? paths.run_dir / "experiment.json" : fs::path(rep_in);
      if (!fs::exists(in)) throw OrchestrationError("no experiment result at " + in.string());
      const auto result = parse_json<experiment::ExperimentResult>(read_json_file(in), "experiment result");
      const fs::path out = rep_out.empty() ? paths.report_dir() : fs::path(rep_out);
      report::write_report(report::render_report(result), out);
      print_json({{"report", (out / "report.md").string()}});
    } else if (*exp_cmd) {
      const auto cfg = g.config();
      experiment::ExperimentPlan plan = experiment::ExperimentPlan::default_grid(experiment::Mode::natural, g.seed);
      if (!plan_path.empty())
        plan = parse_json<experiment::ExperimentPlan>(read_json_file(plan_path), "plan");
      if (prepare) {
        prep.seed = g.seed;
        experiment::prepare_run(paths, prep, cfg);
      }
      const auto result = experiment::run_experiment(plan, paths, cfg);
      report::write_report(report::render_report(result), paths.report_dir());
      print_json({{"cells", result.cells.size()}, {"report", (paths.report_dir() / "report.md").string()}});
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
