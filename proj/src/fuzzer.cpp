#include "cgt/fuzzer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <spdlog/spdlog.h>

#include "cgt/det_eval.hpp"
#include "cgt/image_io.hpp"
#include "cgt/rng.hpp"

namespace cgt::fuzz {

using json = nlohmann::json;

namespace {

std::string relative_to(const fs::path& path, const fs::path& base) {
  const fs::path abs = fs::absolute(path).lexically_normal();
  const fs::path rel = abs.lexically_relative(fs::absolute(base).lexically_normal());
  return rel.empty() ? abs.generic_string() : rel.generic_string();
}

json boxes_to_json(const Boxes& boxes) {
  json a = json::array();
  for (const Box& b : boxes) a.push_back({b.x_min, b.y_min, b.x_max, b.y_max});
  return a;
}

Boxes boxes_from_json(const json& a) {
  Boxes out;
  for (const auto& b : a) {
    if (b.size() != 4) throw IntegrityError("box must have 4 coordinates");
    out.push_back(Box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()});
  }
  return out;
}

data::Dataset with_base(data::Manifest entries, fs::path base) {
  data::Dataset ds;
  ds.entries = std::move(entries);
  ds.base_dir = std::move(base);
  return ds;
}

constexpr const char* kManifests[] = {"new_train_val", "cgt_data", "clean_test",
                                      "adv_test",      "cgt_adv",  "natural_test"};

template <class Split>
auto* manifest_slot(Split& s, std::string_view name) {
  if (name == "new_train_val") return &s.new_train_val;
  if (name == "cgt_data") return &s.cgt_data;
  if (name == "clean_test") return &s.clean_test;
  if (name == "adv_test") return &s.adv_test;
  if (name == "cgt_adv") return &s.cgt_adv;
  return &s.natural_test;
}

/// Up to 10 seeds are tried per image; the clean image stands in when all are rejected.
data::Manifest make_natural_test(const data::Dataset& test, const fs::path& out_dir,
                                 std::uint64_t seed, const mutate::MutationParams& params) {
  const fs::path img_dir = out_dir / "natural_test";
  fs::create_directories(img_dir);
  data::Manifest out;
  for (const auto& e : test.entries) {
    const Image image = test.load_image(e);
    Image result = image;
    Boxes boxes = e.boxes;
    for (std::uint64_t k = 0; k < 10; ++k) {
      auto m = mutate::mutate_natural(image, e.boxes, image,
                                      derive_seed({seed, fnv1a("natural"), fnv1a(e.id), k}), params);
      if (m) {
        result = std::move(m->image);
        boxes = std::move(m->boxes);
        break;
      }
    }
    const std::string rel = "natural_test/" + e.id + ".png";
    io::write_png(result, out_dir / rel);
    out.push_back(data::ManifestEntry{e.id, rel, boxes});
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Split

std::uint64_t CorruptionGrid::image_seed(const std::string& id) const {
  return derive_seed({seed, fnv1a(id)});
}

void to_json(json& j, const CorruptionGrid& g) {
  json kinds = json::array();
  for (auto k : g.kinds) kinds.push_back(mutate::to_string(k));
  j = json{{"kinds", kinds}, {"severities", g.severities}, {"seed", g.seed}};
}

void from_json(const json& j, CorruptionGrid& g) {
  g.kinds.clear();
  for (const auto& k : j.at("kinds")) g.kinds.push_back(mutate::corruption_from_string(k.get<std::string>()));
  g.severities = j.at("severities").get<std::vector<int>>();
  for (int s : g.severities)
    if (s < 1 || s > 5) throw ArgumentError("corruption severity must be in 1..5");
  g.seed = j.at("seed").get<std::uint64_t>();
}

std::size_t train_share(std::size_t n) {
  return static_cast<std::size_t>(std::llround(2.0 * static_cast<double>(n) / 3.0));
}

DatasetSplit split_dataset(const data::Dataset& train_val, const data::Dataset& test,
                           const fs::path& out_dir, const SplitOptions& options) {
  if (train_val.entries.empty()) throw ArgumentError("train_val manifest is empty");
  if (test.entries.empty()) throw ArgumentError("test manifest is empty");
  options.natural_params.validate();
  fs::create_directories(out_dir);

  std::vector<std::size_t> order(train_val.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed({options.seed, fnv1a("split")}));
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_new = train_share(order.size());
  std::vector<std::size_t> a(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_new));
  std::vector<std::size_t> b(order.begin() + static_cast<std::ptrdiff_t>(n_new), order.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());

  const data::Manifest tv = data::rebase(train_val, out_dir);
  DatasetSplit s;
  s.dir = out_dir;
  s.seed = options.seed;
  s.corruptions = options.corruptions;
  data::Manifest m_new, m_cgt;
  for (auto i : a) m_new.push_back(tv[i]);
  for (auto i : b) m_cgt.push_back(tv[i]);
  s.new_train_val = with_base(std::move(m_new), out_dir);
  s.cgt_data = with_base(std::move(m_cgt), out_dir);
  s.clean_test = with_base(data::rebase(test, out_dir), out_dir);
  s.adv_test = with_base({}, out_dir);
  s.cgt_adv = with_base({}, out_dir);
  s.natural_test = with_base(
      make_natural_test(test, out_dir, options.seed, options.natural_params), out_dir);
  if (options.adv_source) {
    attach_adversarial(s, *options.adv_source);  // saves
  } else {
    save_split(s);
  }
  return s;
}

void attach_adversarial(DatasetSplit& split, const fs::path& adv_source) {
  data::Manifest adv, cgt_adv;
  for (const auto& e : split.clean_test.entries) {
    const fs::path p = adv_source / (e.id + ".png");
    if (!fs::exists(p))
      throw IncompletePairingError("no adversarial counterpart for test image '" + e.id + "' in " +
                                   adv_source.string());
    adv.push_back(data::ManifestEntry{e.id, relative_to(p, split.dir), e.boxes});
  }
  for (const auto& e : split.cgt_data.entries) {
    const fs::path p = adv_source / (e.id + ".png");
    if (fs::exists(p)) cgt_adv.push_back(data::ManifestEntry{e.id, relative_to(p, split.dir), e.boxes});
  }
  split.adv_test = with_base(std::move(adv), split.dir);
  split.cgt_adv = with_base(std::move(cgt_adv), split.dir);
  save_split(split);
}

void save_split(const DatasetSplit& split) {
  fs::create_directories(split.dir);
  for (const char* name : kManifests)
    data::write_manifest(manifest_slot(split, name)->entries, split.dir / (std::string(name) + ".jsonl"));
  json j{{"seed", split.seed}, {"corruptions", split.corruptions}};
  std::ofstream out(split.dir / "split.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (split.dir / "split.json").string());
  out << j.dump(2) << '\n';
}

DatasetSplit load_split(const fs::path& dir) {
  const fs::path meta = dir / "split.json";
  if (!fs::exists(meta)) throw OrchestrationError("no split found in " + dir.string());
  DatasetSplit s;
  s.dir = dir;
  try {
    std::ifstream in(meta);
    const json j = json::parse(in);
    s.seed = j.at("seed").get<std::uint64_t>();
    s.corruptions = j.at("corruptions").get<CorruptionGrid>();
  } catch (const json::exception& e) {
    throw FormatError("bad split.json: " + std::string(e.what()));
  }
  for (const char* name : kManifests)
    *manifest_slot(s, name) = with_base(data::read_manifest(dir / (std::string(name) + ".jsonl")), dir);
  return s;
}

// ---------------------------------------------------------------------------
// Predicate and configuration

Verdict is_bug(double ap_orig, double ap_mut, bool cov_check, double alpha_map) {
  if (!(ap_orig > 0)) return Verdict::skipped;
  return ap_mut / ap_orig <= alpha_map && cov_check ? Verdict::bug : Verdict::not_bug;
}

void FuzzConfig::validate() const {
  if (!(alpha_map > 0 && alpha_map <= 1)) throw ArgumentError("alpha_map must be in (0, 1]");
  if (!(t_single >= 0 && t_single <= 1)) throw ArgumentError("t_single must be in [0, 1]");
  if (n_rounds_stage1 <= 0 || n_samples <= 0 || n_rounds_stage2 < 0 || adv_rounds <= 0 ||
      adv_samples <= 0)
    throw ArgumentError("fuzzing round and sample counts must be positive");
  mutation.validate();
}

void to_json(json& j, const FuzzConfig& c) {
  j = json{{"alpha_map", c.alpha_map},
           {"metric", coverage::to_string(c.metric)},
           {"combine", c.combine == coverage::Combine::conjunction ? "conjunction" : "disjunction"},
           {"t_single", c.t_single},
           {"n_rounds_stage1", c.n_rounds_stage1},
           {"n_samples", c.n_samples},
           {"n_rounds_stage2", c.n_rounds_stage2},
           {"adv_rounds", c.adv_rounds},
           {"adv_samples", c.adv_samples},
           {"mutation", c.mutation},
           {"seed", c.seed}};
}

void from_json(const json& j, FuzzConfig& c) {
  const FuzzConfig d;
  c.alpha_map = j.value("alpha_map", d.alpha_map);
  c.metric = coverage::metric_selection_from_string(j.value("metric", std::string("none")));
  const std::string combine = j.value("combine", std::string("conjunction"));
  if (combine == "conjunction") c.combine = coverage::Combine::conjunction;
  else if (combine == "disjunction") c.combine = coverage::Combine::disjunction;
  else throw ArgumentError("combine must be 'conjunction' or 'disjunction'");
  c.t_single = j.value("t_single", d.t_single);
  c.n_rounds_stage1 = j.value("n_rounds_stage1", d.n_rounds_stage1);
  c.n_samples = j.value("n_samples", d.n_samples);
  c.n_rounds_stage2 = j.value("n_rounds_stage2", d.n_rounds_stage2);
  c.adv_rounds = j.value("adv_rounds", d.adv_rounds);
  c.adv_samples = j.value("adv_samples", d.adv_samples);
  c.mutation = j.contains("mutation") ? j.at("mutation").get<mutate::MutationParams>() : d.mutation;
  c.seed = j.value("seed", d.seed);
}

// ---------------------------------------------------------------------------
// Bugs and the store

std::string to_string(Stage s) {
  switch (s) {
    case Stage::stage1: return "stage1";
    case Stage::stage2: return "stage2";
    case Stage::adversarial: return "adversarial";
  }
  return "?";
}

Stage stage_from_string(const std::string& s) {
  for (Stage st : {Stage::stage1, Stage::stage2, Stage::adversarial})
    if (to_string(st) == s) return st;
  throw FormatError("unknown stage '" + s + "'");
}

void to_json(json& j, const Bug& b) {
  j = json{{"original_id", b.original_id},
           {"original_path", b.original_path},
           {"original_boxes", boxes_to_json(b.original_boxes)},
           {"mutant_path", b.mutant_path},
           {"mutant_boxes", boxes_to_json(b.mutant_boxes)},
           {"ap_orig", b.ap_orig},
           {"ap_mut", b.ap_mut},
           {"ratio", b.ratio},
           {"coverage_before", b.coverage_before},
           {"coverage_after", b.coverage_after},
           {"stage", to_string(b.stage)},
           {"round", b.round},
           {"parent", b.parent},
           {"mutation", b.mutation ? json(*b.mutation) : json(nullptr)},
           {"source_tag", b.source_tag},
           {"hash", b.hash}};
}

void from_json(const json& j, Bug& b) {
  b.original_id = j.at("original_id").get<std::string>();
  b.original_path = j.at("original_path").get<std::string>();
  b.original_boxes = boxes_from_json(j.at("original_boxes"));
  b.mutant_path = j.at("mutant_path").get<std::string>();
  if (!j.contains("mutant_boxes")) throw IntegrityError("bug without mutant annotations");
  b.mutant_boxes = boxes_from_json(j.at("mutant_boxes"));
  b.ap_orig = j.at("ap_orig").get<double>();
  b.ap_mut = j.at("ap_mut").get<double>();
  b.ratio = j.at("ratio").get<double>();
  b.coverage_before = j.at("coverage_before").get<std::vector<std::pair<std::string, double>>>();
  b.coverage_after = j.at("coverage_after").get<std::vector<std::pair<std::string, double>>>();
  b.stage = stage_from_string(j.at("stage").get<std::string>());
  b.round = j.at("round").get<int>();
  b.parent = j.at("parent").get<std::string>();
  if (j.at("mutation").is_null()) b.mutation.reset();
  else b.mutation = j.at("mutation").get<mutate::MutationRecord>();
  b.source_tag = j.at("source_tag").get<std::string>();
  b.hash = j.at("hash").get<std::string>();
}

BugStore::BugStore(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_ / "mutants");
  const fs::path journal = dir_ / "bugs.jsonl";
  if (!fs::exists(journal)) return;
  std::ifstream in(journal);
  if (!in) throw IoError("cannot read " + journal.string());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    Bug b;
    try {
      b = json::parse(line).get<Bug>();
    } catch (const json::exception& e) {
      throw IntegrityError("bad bug journal line " + std::to_string(n) + ": " + e.what());
    }
    if (!hashes_.insert(b.hash).second)
      throw IntegrityError("duplicate mutant hash " + b.hash + " in bug journal");
    bugs_.push_back(std::move(b));
  }
}

std::vector<Bug> BugStore::by_stage(Stage s) const {
  std::vector<Bug> out;
  for (const auto& b : bugs_)
    if (b.stage == s) out.push_back(b);
  return out;
}

fs::path BugStore::resolve(const std::string& stored_path) const {
  const fs::path p(stored_path);
  return p.is_absolute() ? p : dir_ / p;
}

bool BugStore::add(Bug bug, const Image& mutant, const fs::path& original_path) {
  if (bug.hash.empty()) bug.hash = io::image_hash(mutant);
  if (hashes_.contains(bug.hash)) return false;
  bug.mutant_path = "mutants/" + bug.hash + ".png";
  bug.original_path = relative_to(original_path, dir_);
  io::write_png(mutant, dir_ / bug.mutant_path);
  std::ofstream out(dir_ / "bugs.jsonl", std::ios::app);
  if (!out) throw IoError("cannot append to bug journal in " + dir_.string());
  out << json(bug).dump() << '\n';
  if (!out) throw IoError("short write to bug journal in " + dir_.string());
  hashes_.insert(bug.hash);
  bugs_.push_back(std::move(bug));
  return true;
}

// ---------------------------------------------------------------------------
// Loops

int RoundReports::total_bugs() const {
  int n = 0;
  for (const auto& r : rounds) n += r.bugs;
  return n;
}

void to_json(json& j, const RoundReport& r) {
  j = json{{"stage", to_string(r.stage)}, {"round", r.round},         {"sampled", r.sampled},
           {"rejected", r.rejected},      {"skipped", r.skipped},     {"evaluated", r.evaluated},
           {"bugs", r.bugs},              {"duplicates", r.duplicates}};
}

ImageEval evaluate_image(const nn::ModelGraph& model, const Image& image, const Boxes& gts) {
  auto fwd = nn::forward_with_trace(model, image);
  ImageEval ev;
  ev.ap = eval::average_precision(nn::decode_and_nms(fwd.raw, model), gts);
  ev.summary = coverage::summarize_trace(fwd.trace);
  return ev;
}

namespace {

void check_target(const Target& t, const FuzzConfig& config) {
  if (t.model == nullptr) throw ArgumentError("fuzzing needs a model");
  const bool boundary = config.metric == coverage::MetricSelection::nbc ||
                        config.metric == coverage::MetricSelection::snac ||
                        config.metric == coverage::MetricSelection::nbc_snac;
  if (boundary && t.profile == nullptr) throw ArgumentError("boundary metrics need a neuron profile");
}

bool coverage_gate(const Target& t, const FuzzConfig& c, const coverage::ActivationSummary& orig,
                   const coverage::ActivationSummary& mut) {
  if (c.metric == coverage::MetricSelection::none) return true;
  return coverage::coverage_increase(c.metric, orig, mut, t.profile, c.t_single, c.combine);
}

std::vector<std::size_t> sample_round(std::size_t n, int k, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min<std::size_t>(n, static_cast<std::size_t>(k)));
  return idx;
}

/// Shared tail of every loop: hash, evaluate, gate, store.
struct Candidate {
  std::string original_id;
  fs::path original_path;
  Boxes original_boxes;
  const ImageEval* orig = nullptr;
  Image image;  // already 8-bit exact
  Boxes boxes;
  Stage stage;
  int round;
  std::string parent;
  std::optional<mutate::MutationRecord> mutation;
  std::string source_tag;
};

void judge(const Target& t, const FuzzConfig& c, BugStore& store, Candidate cand, RoundReport& rep) {
  const std::string hash = io::image_hash(cand.image);
  if (store.contains(hash)) {
    ++rep.duplicates;
    return;
  }
  const ImageEval mut = evaluate_image(*t.model, cand.image, cand.boxes);
  ++rep.evaluated;
  const bool cov = coverage_gate(t, c, cand.orig->summary, mut.summary);
  if (is_bug(cand.orig->ap, mut.ap, cov, c.alpha_map) != Verdict::bug) return;
  Bug b;
  b.original_id = cand.original_id;
  b.original_boxes = cand.original_boxes;
  b.mutant_boxes = cand.boxes;
  b.ap_orig = cand.orig->ap;
  b.ap_mut = mut.ap;
  b.ratio = mut.ap / cand.orig->ap;
  if (c.metric != coverage::MetricSelection::none) {
    b.coverage_before = coverage::selection_ratios(c.metric, cand.orig->summary, t.profile, c.t_single);
    b.coverage_after = coverage::selection_ratios(c.metric, mut.summary, t.profile, c.t_single);
  }
  b.stage = cand.stage;
  b.round = cand.round;
  b.parent = cand.parent;
  b.mutation = std::move(cand.mutation);
  b.source_tag = cand.source_tag;
  b.hash = hash;
  if (store.add(std::move(b), cand.image, cand.original_path)) ++rep.bugs;
}

void log_round(const RoundReport& r) {
  spdlog::info("{} round {}: sampled {} rejected {} skipped {} evaluated {} bugs {}", to_string(r.stage),
               r.round, r.sampled, r.rejected, r.skipped, r.evaluated, r.bugs);
}

}  // namespace

RoundReports run_stage1(const Target& target, const DatasetSplit& split, const FuzzConfig& config,
                        BugStore& store) {
  config.validate();
  check_target(target, config);
  const auto& entries = split.cgt_data.entries;
  if (entries.empty()) throw ArgumentError("cgt_data is empty");
  std::map<std::string, ImageEval> cache;
  RoundReports out;
  for (int r = 0; r < config.n_rounds_stage1; ++r) {
    RoundReport rep;
    rep.stage = Stage::stage1;
    rep.round = r;
    const auto picks = sample_round(entries.size(), config.n_samples,
                                    derive_seed({config.seed, fnv1a("stage1"), static_cast<std::uint64_t>(r)}));
    for (std::size_t i : picks) {
      const auto& e = entries[i];
      ++rep.sampled;
      const Image image = split.cgt_data.load_image(e);
      auto it = cache.find(e.id);
      if (it == cache.end()) it = cache.emplace(e.id, evaluate_image(*target.model, image, e.boxes)).first;
      if (!(it->second.ap > 0)) {
        ++rep.skipped;
        continue;
      }
      const std::uint64_t seed =
          derive_seed({config.seed, fnv1a("stage1"), fnv1a(e.id), static_cast<std::uint64_t>(r)});
      auto m = mutate::mutate_natural(image, e.boxes, image, seed, config.mutation);
      if (!m) {
        ++rep.rejected;
        continue;
      }
      Candidate cand{e.id, split.cgt_data.image_path(e), e.boxes, &it->second,
                     io::quantize(m->image), std::move(m->boxes), Stage::stage1, r, "",
                     std::move(m->record), ""};
      judge(target, config, store, std::move(cand), rep);
    }
    log_round(rep);
    out.rounds.push_back(rep);
  }
  return out;
}

RoundReports run_stage2(const Target& target, const FuzzConfig& config, BugStore& store) {
  config.validate();
  check_target(target, config);
  RoundReports out;
  const std::vector<Bug> suite = store.by_stage(Stage::stage1);
  if (suite.empty()) {
    out.warnings.push_back("stage 2 skipped: no stage-1 bugs");
    spdlog::warn("{}", out.warnings.back());
    return out;
  }
  // Clean-original evaluations: AP baseline and coverage reference.
  std::map<std::string, ImageEval> originals;
  std::vector<Image> parents;
  parents.reserve(suite.size());
  for (const Bug& b : suite) {
    if (!originals.contains(b.original_id)) {
      const Image orig = io::read_png(store.resolve(b.original_path));
      originals.emplace(b.original_id, evaluate_image(*target.model, orig, b.original_boxes));
    }
    parents.push_back(io::read_png(store.resolve(b.mutant_path)));
  }
  for (int r = 0; r < config.n_rounds_stage2; ++r) {
    RoundReport rep;
    rep.stage = Stage::stage2;
    rep.round = r;
    for (std::size_t k = 0; k < suite.size(); ++k) {
      const Bug& b = suite[k];
      ++rep.sampled;
      const ImageEval& orig = originals.at(b.original_id);
      const std::uint64_t seed =
          derive_seed({config.seed, fnv1a("stage2"), fnv1a(b.hash), static_cast<std::uint64_t>(r)});
      auto m = mutate::mutate_natural(parents[k], b.mutant_boxes, parents[k], seed, config.mutation);
      if (!m) {
        ++rep.rejected;
        continue;
      }
      Candidate cand{b.original_id, store.resolve(b.original_path), b.original_boxes, &orig,
                     io::quantize(m->image), std::move(m->boxes), Stage::stage2, r, b.hash,
                     std::move(m->record), ""};
      judge(target, config, store, std::move(cand), rep);
    }
    log_round(rep);
    out.rounds.push_back(rep);
  }
  return out;
}

RoundReports run_adversarial(const Target& target, const DatasetSplit& split,
                             const FuzzConfig& config, BugStore& store) {
  config.validate();
  check_target(target, config);
  const auto& clean = split.cgt_data.entries;
  if (clean.empty()) throw ArgumentError("cgt_data is empty");
  std::map<std::string, const data::ManifestEntry*> adv;
  for (const auto& e : split.cgt_adv.entries) adv.emplace(e.id, &e);
  for (const auto& e : clean)
    if (!adv.contains(e.id))
      throw IncompletePairingError("no adversarial counterpart for cgt image '" + e.id + "'");
  std::map<std::string, ImageEval> cache;
  RoundReports out;
  for (int r = 0; r < config.adv_rounds; ++r) {
    RoundReport rep;
    rep.stage = Stage::adversarial;
    rep.round = r;
    const auto picks = sample_round(clean.size(), config.adv_samples,
                                    derive_seed({config.seed, fnv1a("adversarial"), static_cast<std::uint64_t>(r)}));
    for (std::size_t i : picks) {
      const auto& e = clean[i];
      ++rep.sampled;
      auto it = cache.find(e.id);
      if (it == cache.end())
        it = cache.emplace(e.id, evaluate_image(*target.model, split.cgt_data.load_image(e), e.boxes)).first;
      if (!(it->second.ap > 0)) {
        ++rep.skipped;
        continue;
      }
      const auto* a = adv.at(e.id);
      Candidate cand{e.id, split.cgt_data.image_path(e), e.boxes, &it->second,
                     io::quantize(split.cgt_adv.load_image(*a)), e.boxes, Stage::adversarial, r, "",
                     std::nullopt, a->image_path};
      judge(target, config, store, std::move(cand), rep);
    }
    log_round(rep);
    out.rounds.push_back(rep);
  }
  return out;
}

data::Manifest build_retrain_set(const DatasetSplit& split, const BugStore& store,
                                 const fs::path& manifest_path) {
  const fs::path base = manifest_path.has_parent_path() ? manifest_path.parent_path() : fs::path(".");
  data::Manifest out = data::rebase(split.new_train_val, base);
  std::set<std::string> ids;
  for (const auto& e : out) ids.insert(e.id);
  for (const Bug& b : store.bugs()) {
    const fs::path mutant = store.resolve(b.mutant_path);
    if (!fs::exists(mutant)) throw IntegrityError("bug mutant missing: " + mutant.string());
    if (ids.insert(b.original_id).second)
      out.push_back(data::ManifestEntry{b.original_id, relative_to(store.resolve(b.original_path), base),
                                        b.original_boxes});
    const std::string mid = "bug-" + b.hash;
    if (ids.insert(mid).second)
      out.push_back(data::ManifestEntry{mid, relative_to(mutant, base), b.mutant_boxes});
  }
  data::write_manifest(out, manifest_path);
  return out;
}

}  // namespace cgt::fuzz
