// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.
//
//   cgt_acceptance [work_dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <spdlog/spdlog.h>

#include "ap_oracle.hpp"
#include "cgt/coverage.hpp"
#include "cgt/det_eval.hpp"
#include "cgt/experiment.hpp"
#include "cgt/fuzzer.hpp"
#include "cgt/image_io.hpp"
#include "cgt/mutation.hpp"
#include "cgt/report.hpp"
#include "cgt/synth.hpp"
#include "coverage_oracle.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

using namespace cgt;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

/// Collects failed checks; the first few messages are kept for the report line.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) messages_ += (messages_.empty() ? "" : "; ") + what;
  }
  bool ok() const { return failures_ == 0; }
  Outcome outcome(const std::string& summary) const {
    if (ok()) return {true, summary + ", " + std::to_string(checks_) + " checks"};
    return {false, std::to_string(failures_) + "/" + std::to_string(checks_) + " checks failed: " + messages_};
  }

 private:
  long checks_ = 0;
  long failures_ = 0;
  std::string messages_;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Image scaled_random_image(Shape s, std::uint64_t seed) {
  auto img = tt::random_image(s, seed);
  Rng rng(derive_seed({seed, 99}));
  const float k = std::uniform_real_distribution<float>(0.3f, 1.5f)(rng);
  for (float& v : img.storage()) v = std::min(1.0f, v * k);
  return img;
}

// ---------------------------------------------------------------------------
// 1. Coverage oracle equivalence

Outcome criterion1() {
  const auto t0 = Clock::now();
  Checker ck;
  std::size_t max_neurons = 0;
  for (std::uint64_t g = 0; g < 100; ++g) {
    const auto graph = tt::random_tiny_graph(1000 + g, 48);
    max_neurons = std::max(max_neurons, graph.neuron_count());
    std::vector<Image> prof_imgs;
    std::vector<nn::ActivationTrace> prof_traces;
    for (int i = 0; i < 4; ++i) {
      prof_imgs.push_back(scaled_random_image(graph.input_shape, derive_seed({g, 1, std::uint64_t(i)})));
      prof_traces.push_back(nn::forward_with_trace(graph, prof_imgs.back()).trace);
    }
    // Oracle profile: elementwise min/max over the raw traces.
    std::vector<double> low = tt::oracle_raw(prof_traces[0]), high = low;
    for (const auto& t : prof_traces) {
      const auto r = tt::oracle_raw(t);
      for (std::size_t n = 0; n < r.size(); ++n) {
        low[n] = std::min(low[n], r[n]);
        high[n] = std::max(high[n], r[n]);
      }
    }
    const auto profile = coverage::profile_dataset(graph, prof_imgs, "c1");
    ck.expect(profile.low == low && profile.high == high, "profile mismatch, graph " + std::to_string(g));

    for (int i = 0; i < 5; ++i) {
      const auto img = scaled_random_image(graph.input_shape, derive_seed({g, 2, std::uint64_t(i)}));
      const auto trace = nn::forward_with_trace(graph, img).trace;
      const auto summary = coverage::summarize_trace(trace);
      for (double t : experiment::kNcThresholds) {
        const auto o = tt::oracle_coverage(trace, low, high, t);
        const auto nc = coverage::single_input_coverage(coverage::Metric::nc, summary, nullptr, t);
        ck.expect(nc.covered == o.nc && nc.ratio == o.nc_ratio, "NC mismatch, graph " + std::to_string(g));
      }
      const auto o = tt::oracle_coverage(trace, low, high, 0.5);
      const auto nbc = coverage::single_input_coverage(coverage::Metric::nbc, summary, &profile);
      const auto snac = coverage::single_input_coverage(coverage::Metric::snac, summary, &profile);
      ck.expect(nbc.covered == o.upper && nbc.lower == o.lower && nbc.ratio == o.nbc_ratio,
                "NBC mismatch, graph " + std::to_string(g));
      ck.expect(snac.covered == o.upper && snac.ratio == o.snac_ratio, "SNAC mismatch, graph " + std::to_string(g));
    }
  }
  const double secs = seconds_since(t0);
  ck.expect(max_neurons <= 200, "graph exceeds 200 neurons");
  ck.expect(secs < 60, "runtime " + fmt("%.1f s", secs));
  return ck.outcome("100 graphs x 5 inputs, max " + std::to_string(max_neurons) + " neurons, " + fmt("%.1f s", secs));
}

// ---------------------------------------------------------------------------
// 2. Coverage identities

Outcome criterion2() {
  Checker ck;
  int cases = 0;
  for (std::uint64_t g = 0; g < 100; ++g) {
    const auto graph = tt::random_tiny_graph(2000 + g, 32);
    std::vector<Image> prof_imgs;
    for (int i = 0; i < 4; ++i)
      prof_imgs.push_back(scaled_random_image(graph.input_shape, derive_seed({g, 3, std::uint64_t(i)})));
    const auto profile = coverage::profile_dataset(graph, prof_imgs, "c2");
    for (const auto& img : prof_imgs) {
      const auto s = coverage::summarize_trace(nn::forward_with_trace(graph, img).trace);
      ck.expect(coverage::single_input_coverage(coverage::Metric::nbc, s, &profile).ratio == 0.0, "NBC > 0 on profile set");
      ck.expect(coverage::single_input_coverage(coverage::Metric::snac, s, &profile).ratio == 0.0, "SNAC > 0 on profile set");
    }
    const std::size_t n = graph.neuron_count();
    coverage::CoverageState acc_nc(coverage::Metric::nc, n, 0.5), acc_nbc(coverage::Metric::nbc, n),
        acc_snac(coverage::Metric::snac, n);
    for (int i = 0; i < 10; ++i, ++cases) {
      const auto img = scaled_random_image(graph.input_shape, derive_seed({g, 4, std::uint64_t(i)}));
      const auto s = coverage::summarize_trace(nn::forward_with_trace(graph, img).trace);
      const auto nbc = coverage::single_input_coverage(coverage::Metric::nbc, s, &profile);
      const auto snac = coverage::single_input_coverage(coverage::Metric::snac, s, &profile);
      const double lower_share = 2 * nbc.ratio - snac.ratio;
      ck.expect(lower_share >= 0.0 && lower_share <= 1.0, "2*NBC - SNAC outside [0,1]");
      double prev = 2.0;
      coverage::CoverageResult nc_half;
      for (double t : experiment::kNcThresholds) {
        const auto nc = coverage::single_input_coverage(coverage::Metric::nc, s, nullptr, t);
        ck.expect(nc.ratio <= prev, "NC increased with t");
        prev = nc.ratio;
        if (t == 0.5) nc_half = nc;
      }
      const double before[3] = {acc_nc.ratio(), acc_nbc.ratio(), acc_snac.ratio()};
      const auto old_nc = acc_nc.covered();
      acc_nc = coverage::accumulate_coverage(acc_nc, nc_half);
      acc_nbc = coverage::accumulate_coverage(acc_nbc, nbc);
      acc_snac = coverage::accumulate_coverage(acc_snac, snac);
      ck.expect(acc_nc.ratio() >= before[0] && acc_nbc.ratio() >= before[1] && acc_snac.ratio() >= before[2],
                "accumulated coverage decreased");
      for (std::size_t k = 0; k < n; ++k) ck.expect(!old_nc[k] || acc_nc.covered()[k], "accumulated set shrank");
    }
  }
  return ck.outcome(std::to_string(cases) + " cases");
}

// ---------------------------------------------------------------------------
// 3. AP oracle

Outcome criterion3() {
  Checker ck;
  Rng rng(31337);
  std::uniform_real_distribution<double> pos(0, 50), size(3, 25), score(0, 1), jitter(-3, 3);
  std::uniform_int_distribution<int> count(0, 5);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Box> gts;
    std::vector<Detection> preds;
    const int ng = count(rng), np = count(rng);
    for (int i = 0; i < ng; ++i) {
      const double x = pos(rng), y = pos(rng);
      gts.push_back({x, y, x + size(rng), y + size(rng)});
    }
    for (int i = 0; i < np; ++i) {
      Box b;
      if (!gts.empty() && i % 2 == 0) {
        const Box& g = gts[static_cast<std::size_t>(i) % gts.size()];
        b = {g.x_min + jitter(rng), g.y_min + jitter(rng), g.x_max + jitter(rng), g.y_max + jitter(rng)};
        if (!b.valid()) b = g;
      } else {
        const double x = pos(rng), y = pos(rng);
        b = {x, y, x + size(rng), y + size(rng)};
      }
      preds.push_back({b, score(rng)});
    }
    const double d = std::abs(eval::average_precision(preds, gts) - tt::oracle_ap(preds, gts));
    worst = std::max(worst, d);
    ck.expect(d <= 1e-9, "trial " + std::to_string(trial) + " differs by " + fmt("%.3g", d));
  }
  return ck.outcome("1000 cases, max |diff| " + fmt("%.2g", worst));
}

// ---------------------------------------------------------------------------
// 4. Gradient check

Outcome criterion4() {
  const auto t0 = Clock::now();
  Checker ck;
  double w32 = 0, w64 = 0;
  int redraws = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto r = tt::grad_check(500 + s);
    redraws += r.redraws;
    w32 = std::max(w32, r.err32);
    w64 = std::max(w64, r.err64);
    ck.expect(r.err32 < 1e-3, "net " + std::to_string(s) + " float error " + fmt("%.3g", r.err32));
    ck.expect(r.err64 < 1e-5, "net " + std::to_string(s) + " double error " + fmt("%.3g", r.err64));
  }
  const double secs = seconds_since(t0);
  ck.expect(secs < 120, "runtime " + fmt("%.1f s", secs));
  return ck.outcome("20 nets, max rel error " + fmt("%.2g", w32) + " (32-bit) / " + fmt("%.2g", w64) + " (64-bit), " +
                    std::to_string(redraws) + " batch(es) redrawn at a kink, " + fmt("%.1f s", secs));
}

// ---------------------------------------------------------------------------
// 5. Mutation suite

Outcome criterion5() {
  Checker ck;
  using namespace cgt::mutate;
  const Shape canvas{96, 96, 3};
  const AcceptanceParams acc{};
  int soundness = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto scene = synth::render(synth::sample_scene(seed));
    const auto& img = scene.image;
    for (auto op : kEnhancements) ck.expect(apply_enhancement(img, op, 1.0) == img, "factor-1 " + to_string(op));
    ck.expect(flip_horizontal(flip_horizontal(img)) == img, "image flip involution");
    const GeometricRecord flip{true, 0, 0, 1.0, 0, 0};
    ck.expect(transform_boxes(transform_boxes(scene.boxes, 96, 96, flip), 96, 96, flip) == scene.boxes,
              "box flip involution");
    ck.expect(acceptance_test(img, img, acc), "acceptance(x, x)");
    const auto noise = tt::random_image(canvas, seed);
    ck.expect(acceptance_test(noise, noise, acc), "acceptance(x, x) on noise");
    for (auto k : kCorruptions) {
      const int sev = 1 + static_cast<int>(seed % 5);
      ck.expect(apply_corruption(img, k, sev, seed) == apply_corruption(img, k, sev, seed),
                "corruption determinism " + to_string(k));
    }

    // Annotation soundness: transform each figure's mask, re-extract its box.
    Rng rng(derive_seed({seed, 5}));
    for (const auto& p : synth::sample_scene(seed).persons) {
      const auto mask = synth::person_mask(p, 96, 96);
      const Box box = synth::mask_box(mask);
      if (!box.valid()) continue;
      Image m(canvas);
      for (int y = 0; y < 96; ++y)
        for (int x = 0; x < 96; ++x)
          for (int c = 0; c < 3; ++c) m.at(y, x, c) = mask.at(y, x, 0);
      auto extract = [](const Image& im, float level) {
        Tensor t(Shape{im.height(), im.width(), 1});
        for (int y = 0; y < im.height(); ++y)
          for (int x = 0; x < im.width(); ++x) t.at(y, x, 0) = im.at(y, x, 0);
        return synth::mask_box(t, level);
      };
      const auto fl = apply_geometric(m, {box}, true, 0, 0, 1.0, 0, 0);
      ck.expect(fl.boxes.size() == 1 && extract(fl.image, 0.5f) == fl.boxes[0], "flip annotation not exact");
      const int dx = std::uniform_int_distribution<int>(-2, 2)(rng), dy = std::uniform_int_distribution<int>(-2, 2)(rng);
      const auto tr = apply_geometric(m, {box}, false, dx, dy, 1.0, 0, 0);
      if (!tr.boxes.empty()) {
        const Box got = extract(tr.image, 0.5f), want = tr.boxes[0];
        ck.expect(std::abs(got.x_min - want.x_min) <= 1 && std::abs(got.x_max - want.x_max) <= 1 &&
                      std::abs(got.y_min - want.y_min) <= 1 && std::abs(got.y_max - want.y_max) <= 1,
                  "translate annotation off by > 1 px");
      }
      const double s = std::uniform_real_distribution<double>(0.5, 1.0)(rng);
      const auto sc = apply_geometric(m, {box}, seed % 2 == 0, dx, dy, s, rng);
      if (!sc.boxes.empty()) {
        const Box got = extract(sc.image, 0.0f), want = sc.boxes[0];
        ck.expect(std::abs(got.x_min - want.x_min) <= 1 && std::abs(got.x_max - want.x_max) <= 1 &&
                      std::abs(got.y_min - want.y_min) <= 1 && std::abs(got.y_max - want.y_max) <= 1,
                  "scale annotation off by > 1 px (seed " + std::to_string(seed) + ")");
      }
      ++soundness;
    }
  }
  return ck.outcome("50 scenes, " + std::to_string(soundness) + " figure re-renders");
}

// ---------------------------------------------------------------------------
// Shared reduced-scale experiment (criteria 6, 8, 9)

experiment::PrepareOptions reduced_prepare() {
  experiment::PrepareOptions p;
  p.n_train_val = 150;
  p.n_test = 30;
  p.seed = 3;
  p.adv.iterations = 8;
  return p;
}

experiment::ExperimentConfig reduced_config() {
  experiment::ExperimentConfig c;
  c.train.epochs = 8;
  c.validation_images = 0;
  c.fuzz.n_rounds_stage1 = 3;
  c.fuzz.n_samples = 30;
  c.fuzz.n_rounds_stage2 = 2;
  c.fuzz.adv_rounds = 3;
  c.fuzz.adv_samples = 20;
  return c;
}

struct ReducedRun {
  experiment::RunPaths paths;
  std::optional<experiment::ExperimentResult> result;
};

void prepare_reduced(ReducedRun& run) {
  fs::remove_all(run.paths.run_dir);
  experiment::prepare_run(run.paths, reduced_prepare(), reduced_config());
}

// ---------------------------------------------------------------------------
// 6. Bug-predicate structure

std::set<std::string> run_natural(const fuzz::Target& target, const fuzz::DatasetSplit& split, fuzz::FuzzConfig cfg,
                                  const fs::path& dir, bool adversarial) {
  fs::remove_all(dir);
  fuzz::BugStore store(dir);
  if (adversarial) {
    fuzz::run_adversarial(target, split, cfg, store);
  } else {
    fuzz::run_stage1(target, split, cfg, store);
    fuzz::run_stage2(target, cfg, store);
  }
  std::set<std::string> out;
  for (const auto& b : store.bugs()) out.insert(b.hash);
  return out;
}

Outcome criterion6(const ReducedRun& run) {
  Checker ck;
  const auto model = nn::load_model(run.paths.baseline_model());
  const auto profile = coverage::load_profile(run.paths.baseline_profile());
  const auto split = fuzz::load_split(run.paths.split_dir());
  const fuzz::Target target{&model, &profile};
  using coverage::MetricSelection;
  const MetricSelection metrics[] = {MetricSelection::none, MetricSelection::nc, MetricSelection::snac,
                                     MetricSelection::nbc, MetricSelection::nbc_snac};
  std::string counts;
  for (bool adversarial : {false, true}) {
    std::map<std::pair<int, double>, std::set<std::string>> sets;
    for (auto m : metrics)
      for (double a : {0.6, 0.3}) {
        auto cfg = reduced_config().fuzz;
        cfg.metric = m;
        cfg.alpha_map = a;
        cfg.seed = 17;
        const auto name = std::string(adversarial ? "adv_" : "nat_") + coverage::to_string(m) + fmt("_%.1f", a);
        sets[{static_cast<int>(m), a}] = run_natural(target, split, cfg, run.paths.run_dir / "criterion6" / name, adversarial);
      }
    auto sub = [](const std::set<std::string>& a, const std::set<std::string>& b) {
      return std::includes(b.begin(), b.end(), a.begin(), a.end());
    };
    const std::string mode = adversarial ? "adversarial" : "natural";
    for (auto m : metrics) {
      const int mi = static_cast<int>(m);
      ck.expect(sub(sets[{mi, 0.3}], sets[{mi, 0.6}]), mode + " alpha monotonicity fails for " + coverage::to_string(m));
      for (double a : {0.6, 0.3})
        ck.expect(sub(sets[{mi, a}], sets[{static_cast<int>(MetricSelection::none), a}]),
                  mode + " coverage-gated set not a subset for " + coverage::to_string(m));
    }
    const int none = static_cast<int>(MetricSelection::none);
    counts += mode + " none " + std::to_string(sets[{none, 0.6}].size()) + "/" + std::to_string(sets[{none, 0.3}].size()) +
              " nc " + std::to_string(sets[{static_cast<int>(MetricSelection::nc), 0.6}].size()) + " bugs (a=0.6/0.3); ";
    ck.expect(!sets[{none, 0.6}].empty(), mode + " run found no bugs, subset checks would be vacuous");
  }
  counts.resize(counts.size() - 2);
  return ck.outcome(counts);
}

// ---------------------------------------------------------------------------
// 7. End-to-end desk reproduction

Outcome criterion7(const fs::path& work, std::optional<experiment::ExperimentResult>& out) {
  const auto t0 = Clock::now();
  Checker ck;
  experiment::RunPaths paths{work / "desk"};
  fs::remove_all(paths.run_dir);
  const experiment::ExperimentConfig config{};
  experiment::prepare_run(paths, experiment::PrepareOptions{}, config);
  experiment::ExperimentPlan plan;
  plan.cells = {{coverage::MetricSelection::none, 0.6}};
  plan.mode = experiment::Mode::natural;
  plan.seed = 1;
  const auto r = experiment::run_experiment(plan, paths, config);
  report::write_report(report::render_report(r), paths.report_dir());
  out = r;
  const double minutes = seconds_since(t0) / 60;
  const auto& c = r.cells.at(0);
  ck.expect(r.baseline.map_clean >= 0.6, "baseline mAP " + fmt("%.3f", r.baseline.map_clean));
  ck.expect(c.bugs() >= 50, std::to_string(c.bugs()) + " bugs");
  ck.expect(c.change.natural >= 10.0, "natural change " + fmt("%+.2f%%", c.change.natural));
  ck.expect(c.change.clean >= -5.0, "clean change " + fmt("%+.2f%%", c.change.clean));
  ck.expect(minutes < 45, "runtime " + fmt("%.1f min", minutes));
  return ck.outcome("baseline mAP " + fmt("%.3f", r.baseline.map_clean) + ", " + std::to_string(c.bugs()) +
                    " bugs, natural " + fmt("%+.2f%%", c.change.natural) + ", clean " +
                    fmt("%+.2f%%", c.change.clean) + ", " + fmt("%.1f min", minutes));
}

// ---------------------------------------------------------------------------
// 8. Coverage-ablation grid, reproducible

Outcome criterion8(ReducedRun& a, ReducedRun& b) {
  const auto t0 = Clock::now();
  Checker ck;
  const auto plan = experiment::ExperimentPlan::default_grid(experiment::Mode::natural, 5);
  for (ReducedRun* run : {&a, &b}) {
    if (run != &a) prepare_reduced(*run);  // `a` is prepared before criterion 6
    run->result = experiment::run_experiment(plan, run->paths, reduced_config());
    report::write_report(report::render_report(*run->result), run->paths.report_dir());
  }
  const auto& r = *a.result;
  ck.expect(r.cells.size() == 10, std::to_string(r.cells.size()) + " cells");
  const auto groups = report::coverage_means(r);
  ck.expect(groups.size() == 2 && groups[0].cells == 2 && groups[1].cells == 8, "with/without coverage summary");
  const auto md = slurp(a.paths.report_dir() / "report.md");
  ck.expect(md.find("with coverage") != std::string::npos && md.find("without coverage") != std::string::npos,
            "report lacks the coverage comparison");
  for (const char* f : {"report/report.md", "report/report.csv", "experiment.json", "baseline/model.sdnm"})
    ck.expect(slurp(a.paths.run_dir / f) == slurp(b.paths.run_dir / f), std::string(f) + " differs between runs");
  for (const auto& c : r.cells)
    ck.expect(slurp(a.paths.cell_dir(c.cell) / "model.sdnm") == slurp(b.paths.cell_dir(c.cell) / "model.sdnm"),
              c.cell.name() + " model differs between runs");
  std::string gap;
  if (groups.size() == 2)
    gap = ", natural change without/with coverage " + fmt("%+.2f", groups[0].mean.natural) + "/" +
          fmt("%+.2f", groups[1].mean.natural) + " %";
  return ck.outcome("10 cells x 2 runs identical" + gap + ", " + fmt("%.1f min", seconds_since(t0) / 60));
}

// ---------------------------------------------------------------------------
// 9. Corruption scores

Outcome criterion9(const std::vector<const experiment::ExperimentResult*>& results) {
  Checker ck;
  int models = 0, bounded = 0;
  auto check = [&](const eval::EvalScores& s) {
    ++models;
    ck.expect(s.corruption_maps.size() == 40, std::to_string(s.corruption_maps.size()) + " grid cells");
    std::vector<double> maps;
    bool all_below = true;
    for (auto kind : mutate::kCorruptions)
      for (int sev = 1; sev <= 5; ++sev) {
        const auto it = s.corruption_maps.find(mutate::to_string(kind) + "/" + std::to_string(sev));
        if (it == s.corruption_maps.end()) continue;
        maps.push_back(it->second);
        all_below = all_below && it->second <= s.map_clean;
      }
    const auto ref = eval::corruption_scores(maps, s.map_clean);
    ck.expect(s.mpc == ref.mpc, "stored mPC differs from the grid mean");
    ck.expect(s.rpc == s.mpc / s.map_clean, "rpc != mpc / map_clean");
    if (all_below) {
      ++bounded;
      ck.expect(s.rpc <= 1.0, "rpc > 1 with every grid mAP <= clean");
    }
  };
  for (const auto* r : results) {
    if (r == nullptr) continue;
    check(r->baseline);
    for (const auto& c : r->cells) check(c.scores);
  }
  // Random grids with every entry at or below clean.
  Rng rng(9);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double clean = u(rng);
    std::vector<double> grid(40);
    for (double& v : grid) v = clean * u(rng);
    if (i % 10 == 0) std::fill(grid.begin(), grid.end(), clean);
    const auto s = eval::corruption_scores(grid, clean);
    ck.expect(s.rpc == s.mpc / clean && s.rpc <= 1.0, "random grid " + std::to_string(i));
  }
  return ck.outcome(std::to_string(models) + " evaluated models (" + std::to_string(bounded) +
                    " with all grid mAPs <= clean) + 1000 random grids");
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "cgt_acceptance";
  fs::create_directories(work);

  int failed = 0;
  auto report = [&](int n, const char* name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str());
    std::fflush(stdout);
  };

  ReducedRun run_a{{work / "grid_a"}, {}}, run_b{{work / "grid_b"}, {}};
  std::optional<experiment::ExperimentResult> desk;

  report(1, "coverage oracle equivalence", criterion1);
  report(2, "coverage identities", criterion2);
  report(3, "AP oracle", criterion3);
  report(4, "gradient check", criterion4);
  report(5, "mutation suite", criterion5);
  report(6, "bug-predicate structure", [&] {
    prepare_reduced(run_a);
    return criterion6(run_a);
  });
  report(7, "end-to-end desk reproduction", [&] { return criterion7(work, desk); });
  report(8, "coverage-ablation grid", [&] { return criterion8(run_a, run_b); });
  report(9, "corruption scores", [&] {
    return criterion9({desk ? &*desk : nullptr, run_a.result ? &*run_a.result : nullptr,
                       run_b.result ? &*run_b.result : nullptr});
  });
  std::printf("%d of 9 criteria passed\n", 9 - failed);
  return failed == 0 ? 0 : 1;
}
