// Copyright 2026 The pfr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Subcommands behind the pfr command-line tool. Each writes into an output
// directory and finishes with a manifest.json holding the config echo and
// per-file FNV-1a hashes.

#ifndef PFR_CLI_HPP_
#define PFR_CLI_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pfr/conditional.hpp"
#include "pfr/config.hpp"
#include "pfr/core.hpp"
#include "pfr/dataset.hpp"
#include "pfr/decompose.hpp"
#include "pfr/error.hpp"
#include "pfr/eval.hpp"
#include "pfr/io.hpp"
#include "pfr/mi_oracle.hpp"
#include "pfr/synth.hpp"
#include "pfr/trainer.hpp"

namespace pfr {

enum ExitCode : int { kOk = 0, kValidation = 1, kVerification = 2, kIo = 3 };

namespace fs = std::filesystem;

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

// Hashes every regular file under `dir` except the manifest itself.
inline void write_manifest(const fs::path& dir, const std::string& command,
                           const ExperimentConfig& cfg) {
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto rel = fs::relative(e.path(), dir).generic_string();
    if (rel != "manifest.json") files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  ordered_json j;
  j["command"] = command;
  j["config"] = cfg.to_json();
  ordered_json hashes = ordered_json::object();
  std::string all;
  for (const auto& f : files) {
    const auto h = hex64(fnv1a(read_file(dir / f)));
    hashes[f] = h;
    all += f + '\0' + h + '\n';
  }
  j["files"] = hashes;
  j["content_hash"] = hex64(fnv1a(all));
  write_file(dir / "manifest.json", j.dump(2) + "\n");
}

inline std::string content_hash(const fs::path& dir) {
  const auto j = ordered_json::parse(read_file(dir / "manifest.json"));
  return j.at("content_hash").get<std::string>();
}

// How the prompt-free gaps of chosen-shorter pairs sit against the median of
// chosen-longer pairs under the multiplicative ground truth.
struct LengthOrderReport {
  std::size_t chosen_longer = 0;
  std::size_t chosen_shorter = 0;
  double longer_median = std::numeric_limits<double>::quiet_NaN();
  double shorter_below_median = 0.0;
};

inline LengthOrderReport length_order_report(const MultiplicativeWorld& mw,
                                             const SchemeParams& scheme,
                                             const SearchConfig& search) {
  const auto dec = decompose_batch(mw.scorer, mw.dataset, scheme, search);
  std::vector<double> longer;
  std::vector<double> shorter;
  for (std::size_t i = 0; i < dec.size(); ++i) {
    const auto& s = mw.dataset.samples[i];
    if (s.chosen.length > s.rejected.length) longer.push_back(dec[i].prompt_free_gap);
    if (s.chosen.length < s.rejected.length) shorter.push_back(dec[i].prompt_free_gap);
  }
  LengthOrderReport r;
  r.chosen_longer = longer.size();
  r.chosen_shorter = shorter.size();
  std::sort(longer.begin(), longer.end());
  if (!longer.empty()) {
    const std::size_t m = longer.size() / 2;
    r.longer_median = longer.size() % 2 ? longer[m] : 0.5 * (longer[m - 1] + longer[m]);
  }
  std::size_t below = 0;
  for (double d : shorter) below += d < r.longer_median ? 1 : 0;
  if (!shorter.empty()) {
    r.shorter_below_median = static_cast<double>(below) / static_cast<double>(shorter.size());
  }
  return r;
}

inline void cmd_synth(const ExperimentConfig& cfg, const fs::path& out) {
  const auto wc = cfg.world();
  const auto kind = cfg.str("synth.kind");
  const auto seed = cfg.seed();
  const long long n_heldout = cfg.integer("synth.heldout_samples");
  if (n_heldout < 0) throw ConfigError("synth.heldout_samples must be >= 0");
  if (kind != "base" && kind != "length_biased" && kind != "adversarial" &&
      kind != "multiplicative") {
    throw ConfigError("unknown synth.kind: " + kind);
  }
  ensure_dir(out);
  const World world(wc);
  const auto base = gen_base_dataset(world);
  if (kind == "length_biased") {
    write_dataset(out / "dataset",
                  make_length_biased(base, cfg.num("synth.chosen_longer_fraction"), seed));
  } else if (kind == "adversarial") {
    write_dataset(out / "dataset",
                  make_adversarial(base, cfg.num("synth.transform_fraction"), seed));
    write_dataset(out / "original", base);
  } else {
    write_dataset(out / "dataset", base);
  }
  if (kind == "multiplicative") {
    const auto mw = make_multiplicative_gt(wc);
    const auto rep = length_order_report(mw, cfg.scheme(), cfg.search());
    ordered_json j;
    j["chosen_longer_pairs"] = rep.chosen_longer;
    j["chosen_shorter_pairs"] = rep.chosen_shorter;
    j["chosen_longer_median_dr2"] = rep.longer_median;
    j["chosen_shorter_below_median"] = rep.shorter_below_median;
    write_file(out / "multiplicative_report.json", j.dump(2) + "\n");
  }
  if (n_heldout > 0) {
    const auto n = static_cast<std::size_t>(n_heldout);
    write_dataset(out / "heldout_recombined", heldout_recombined(world, n, seed));
    write_dataset(out / "heldout_fresh", heldout_fresh(world, n, seed));
  }
  write_manifest(out, "synth", cfg);
}

inline ordered_json snapshot_summary(const QuadrantSnapshot& s) {
  ordered_json j;
  j["step"] = s.step;
  j["records"] = s.records.size();
  j["mean_dr1"] = [&] {
    std::vector<double> v;
    for (const auto& r : s.records) v.push_back(r.dr1);
    return mean_of(v);
  }();
  j["mean_dr2"] = mean_prompt_free_gap(s);
  std::vector<double> se;
  for (const auto& r : s.records) se.push_back(r.phi_standard_error);
  j["mean_phi_standard_error"] = mean_of(se);
  return j;
}

inline TrainerState run_training(const ExperimentConfig& cfg, const PreferenceDataset& ds) {
  const auto tc = cfg.train();
  const auto bounds = cfg.bounds();
  return cfg.str("train.mode") == "vanilla" ? vanilla_train(ds, tc, bounds)
                                            : prioritized_train(ds, tc, bounds);
}

inline void cmd_train(const ExperimentConfig& cfg, const fs::path& out) {
  const auto path = cfg.str("train.dataset");
  if (path.empty()) throw ConfigError("train.dataset is required");
  const auto tc = cfg.train();
  const auto ds = read_dataset(path);
  if (ds.empty()) throw PreconditionError("training dataset is empty");
  ensure_dir(out);
  const auto init = initial_model(layout_for(ds), cfg.bounds(), tc.init_scale, tc.seed);
  write_model(out / "init_model.json", init);
  const auto st = run_training(cfg, ds);
  write_model(out / "model.json", st.model);
  write_step_log_csv(out / "step_log.csv", st.log);
  ordered_json snaps = ordered_json::array();
  for (const auto& s : st.snapshots) {
    write_quadrant_csv(out / ("quadrant_" + std::to_string(s.step) + ".csv"), s);
    snaps.push_back(snapshot_summary(s));
  }
  ordered_json m;
  m["mode"] = cfg.str("train.mode");
  m["scheme"] = cfg.str("scheme.name");
  m["candidates"] = cfg.integer("scheme.candidates");
  m["steps_run"] = st.step;
  m["exhausted"] = st.exhausted;
  m["final_lambda"] = st.lambda;
  m["final_loss"] = st.log.empty() ? std::numeric_limits<double>::quiet_NaN()
                                   : st.log.back().loss;
  m["snapshots"] = snaps;
  m["train_accuracy"] = heldout_accuracy(st.model, ds);
  write_file(out / "metrics.json", m.dump(2) + "\n");
  write_manifest(out, "train", cfg);
}

// Named check in a verification report.
struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

inline ordered_json to_json(const std::vector<Check>& checks) {
  ordered_json arr = ordered_json::array();
  for (const auto& c : checks) {
    ordered_json j;
    j["name"] = c.name;
    j["value"] = c.value;
    j["tolerance"] = c.tolerance;
    j["passed"] = c.passed;
    arr.push_back(j);
  }
  return arr;
}

// Random bounded model over small feature spaces.
inline RewardFunction random_model(std::size_t d_x, std::size_t d_y, double scale,
                                   std::uint64_t seed, RewardBounds bounds = {}) {
  FeatureLayout layout;
  layout.prompt_dim = d_x;
  layout.response_dim = d_y;
  layout.length_center = 25.0;
  layout.length_scale = 25.0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Vector theta(layout.num_parameters());
  for (double& t : theta) t = normal(rng);
  return RewardFunction(layout, bounds, std::move(theta));
}

struct VerifyCase {
  PreferenceDataset dataset;
  RewardFunction model;
};

inline VerifyCase verify_case(std::uint64_t seed, int index, int max_prompts,
                              int max_pairs) {
  std::mt19937_64 rng(mix_seed(seed, "verify" + std::to_string(index)));
  std::uniform_int_distribution<int> np(2, std::max(2, max_prompts));
  std::uniform_int_distribution<int> npairs(1, std::max(1, max_pairs));
  const int prompts = np(rng);
  const int pairs = npairs(rng);
  // enough responses for `pairs` distinct pairs
  int responses = 2;
  while (responses * (responses - 1) / 2 < pairs) ++responses;
  auto ds = gen_enumerable_dataset(prompts, responses, pairs, 3, 3, rng());
  return {std::move(ds), random_model(3, 3, 0.8, rng())};
}

// Two equally likely prompts that flip the sign of the model gap, with the
// prompt-free gap set to the full gap. A fuzzed model can be nearly
// prompt-independent on a given pair, which makes any r2 look harmless, so the
// control is fixed.
inline double prompt_dependent_control() {
  const EnumerableDataset e(2, 2, {0.25, 0.25, 0.25, 0.25});
  GapTable dr_theta(2, 2);
  dr_theta.values = {3.0, -1.0, -3.0, 1.0};
  return mi_invariance_gap(e, dr_theta, dr_theta);
}

// Identity checks over fuzzed enumerable datasets. With `negative` set, the
// tolerances are applied to constructions that violate the hypotheses.
inline std::vector<Check> run_verify_suite(const ExperimentConfig& cfg, bool negative) {
  const long long n = cfg.integer("verify.datasets");
  if (n <= 0) throw ConfigError("verify.datasets must be positive (empty suite)");
  const int max_prompts = static_cast<int>(cfg.integer("verify.max_prompts"));
  const int max_pairs = static_cast<int>(cfg.integer("verify.max_pairs"));
  if (max_prompts < 2 || max_pairs < 1 || max_prompts * max_pairs > 64) {
    throw ConfigError("verify.max_prompts * verify.max_pairs must lie in [2, 64]");
  }
  const auto search = cfg.search();
  std::vector<Check> checks;
  double t1 = 0.0, t2_mi = 0.0, t2_pr = 0.0, t2_h = 0.0, hw = 0.0, ill = 0.0;
  for (long long i = 0; i < n; ++i) {
    auto vc = verify_case(cfg.seed(), static_cast<int>(i), max_prompts, max_pairs);
    const auto en = enumerate_dataset(vc.dataset);
    const auto& e = en.enumeration;
    const GapTable dr_theta = gap_table(vc.model, vc.dataset, en);
    // response-only r2: one random value per pair
    std::mt19937_64 rng(mix_seed(cfg.seed(), "r2" + std::to_string(i)));
    std::uniform_real_distribution<double> unif(-4.0, 4.0);
    GapTable r2(e.num_prompts(), e.num_pairs());
    for (std::size_t j = 0; j < e.num_pairs(); ++j) {
      const double v = unif(rng);
      for (std::size_t x = 0; x < e.num_prompts(); ++x) r2.at(x, j) = v;
    }
    t1 = std::max(t1, verify_mi_invariance(e, dr_theta, r2));
    const auto rep = verify_phi_split(vc.dataset, vc.model, search);
    t2_mi = std::max(t2_mi, rep.mi_z_wtilde);
    t2_pr = std::max(t2_pr, std::abs(rep.pr_z_one - 0.5));
    t2_h = std::max(t2_h, std::abs(rep.h_z - std::log(2.0)));
    hw = std::max(hw, std::abs(rep.h_w - rep.h_wtilde));
    ill = std::max(ill, ill_formed_split(e, dr_theta).h_z);
  }
  const double neg_t1 = prompt_dependent_control();
  const auto ex = marginalization_counterexample(0.001, 1e6, search);
  if (!negative) {
    checks.push_back({"mi_invariance_mi_difference", t1, 1e-9, t1 <= 1e-9});
    checks.push_back({"phi_split_mi_z_wtilde", t2_mi, 1e-6, t2_mi <= 1e-6});
    checks.push_back({"phi_split_pr_z_one_offset", t2_pr, 1e-6, t2_pr <= 1e-6});
    checks.push_back({"phi_split_h_z_offset", t2_h, 1e-6, t2_h <= 1e-6});
    checks.push_back({"entropy_w_equals_wtilde", hw, 1e-9, hw <= 1e-9});
    checks.push_back({"ill_formed_h_z", ill, 1e-10, ill <= 1e-10});
    checks.push_back({"prompt_dependent_control_gap", neg_t1, 1e-3, neg_t1 > 1e-3});
    checks.push_back({"marginalization_prompt_free_gap", ex.prompt_free_gap, 0.0,
                      ex.prompt_free_gap < 0.0 &&
                          ex.expected_reward_y1 > ex.expected_reward_y2});
  } else {
    // Hypotheses violated on purpose; these are expected to fail.
    checks.push_back({"mi_invariance_with_prompt_dependent_r2", neg_t1, 1e-9, neg_t1 <= 1e-9});
    const double ill_h = ill;
    checks.push_back({"phi_split_h_z_for_ill_formed_split", std::abs(ill_h - std::log(2.0)),
                      1e-6, std::abs(ill_h - std::log(2.0)) <= 1e-6});
  }
  return checks;
}

// Returns the exit code: 0 if every check passed, 2 otherwise.
inline int cmd_verify(const ExperimentConfig& cfg, const fs::path& out,
                      std::ostream& report) {
  const auto suite = cfg.str("verify.suite");
  if (suite != "default" && suite != "negative") {
    throw ConfigError("verify.suite must be default or negative");
  }
  const auto checks = run_verify_suite(cfg, suite == "negative");
  const bool ok = std::all_of(checks.begin(), checks.end(),
                              [](const Check& c) { return c.passed; });
  ordered_json j;
  j["suite"] = suite;
  j["datasets"] = cfg.integer("verify.datasets");
  j["passed"] = ok;
  j["checks"] = to_json(checks);
  const auto text = j.dump(2) + "\n";
  report << text;
  if (!out.empty()) {
    ensure_dir(out);
    write_file(out / "verify_report.json", text);
    write_manifest(out, "verify", cfg);
  }
  return ok ? kOk : kVerification;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      const auto b = cur.find_first_not_of(' ');
      if (b != std::string::npos) out.push_back(cur.substr(b, cur.find_last_not_of(' ') - b + 1));
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

inline void cmd_eval(const ExperimentConfig& cfg, const fs::path& out) {
  const auto model_path = cfg.str("eval.model");
  const auto data_path = cfg.str("eval.dataset");
  if (model_path.empty()) throw ConfigError("eval.model is required");
  if (data_path.empty()) throw ConfigError("eval.dataset is required");
  if (!fs::exists(model_path)) throw IoError("model file not found: " + model_path);
  const auto model = read_model(model_path);
  const auto ds = read_dataset(data_path);
  if (ds.empty()) throw PreconditionError("evaluation dataset is empty");
  const long long n_repl = cfg.integer("eval.replacements");
  const long long n_snap = cfg.integer("eval.snapshot_samples");
  if (n_repl < 0 || n_snap < 0) throw ConfigError("eval counts must be >= 0");
  ensure_dir(out);
  ordered_json m;
  ordered_json acc;
  ordered_json groups;
  acc["dataset"] = heldout_accuracy(model, ds);
  groups["dataset"] = group_accuracy(model, ds);
  for (const auto& h : split_list(cfg.str("eval.heldout"))) {
    const auto hd = read_dataset(h);
    const auto name = fs::path(h).filename().string();
    acc[name] = heldout_accuracy(model, hd);
    groups[name] = group_accuracy(model, hd);
  }
  m["accuracy"] = acc;
  m["group_accuracy"] = groups;
  const auto gaps = prompt_replacement_gaps(
      model, ds, std::min<std::size_t>(static_cast<std::size_t>(n_repl), ds.prompt_pool.size() - 1),
      cfg.seed());
  write_replacement_csv(out / "replacement_gaps.csv", gaps);
  const auto snap = quadrant_snapshot(model, ds, cfg.scheme(),
                                      std::min<std::size_t>(static_cast<std::size_t>(n_snap), ds.size()),
                                      mix_seed(cfg.seed(), "snapshot"), 0, cfg.search());
  write_quadrant_csv(out / "quadrant_eval.csv", snap);
  m["scheme"] = cfg.str("scheme.name");
  m["candidates"] = cfg.integer("scheme.candidates");
  m["snapshot"] = snapshot_summary(snap);
  m["mean_dr2_chosen_longer"] = mean_prompt_free_gap(snap, Group::ChosenLonger);
  m["mean_dr2_chosen_shorter"] = mean_prompt_free_gap(snap, Group::ChosenShorter);
  write_file(out / "metrics.json", m.dump(2) + "\n");
  write_manifest(out, "eval", cfg);
}

// Maps exceptions onto the exit-code contract.
template <class F>
int run_guarded(F&& body, std::ostream& err) {
  try {
    return body();
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const nlohmann::json::exception& e) {
    err << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    err << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }
}

}  // namespace pfr

#endif  // PFR_CLI_HPP_
