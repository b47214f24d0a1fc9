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

// Bradley-Terry reward training, uniform and prompt-free-gap prioritized.
//
// Prioritized step t:
//   draw samples until k of them have dr2 < lambda_t; every drawn dr2 is
//   recorded, rejected samples go back to the loader while their quota lasts
//   take one SGD step on the accepted batch
//   lambda_hat = 2-means boundary of the recorded dr2 values
//   lambda_{t+1} = alpha * lambda_t + (1 - alpha) * lambda_hat
//
// The loader walks shuffled epochs over the dataset. Reinsertion quotas are
// per epoch:
//   Immediate  a rejected sample is appended to the back of the current epoch
//              and its quota decremented; at quota 0 it is dropped
//   Lazy       a rejected sample is set aside; once the epoch is drained the
//              set-aside samples with quota left are reshuffled into a new
//              pass, each consuming one unit of quota

#ifndef PFR_TRAINER_HPP_
#define PFR_TRAINER_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pfr/conditional.hpp"
#include "pfr/core.hpp"
#include "pfr/dataset.hpp"
#include "pfr/decompose.hpp"
#include "pfr/error.hpp"
#include "pfr/eval.hpp"

namespace pfr {

enum class ReinsertionMode { Immediate, Lazy };

inline std::string_view to_string(ReinsertionMode m) {
  return m == ReinsertionMode::Immediate ? "immediate" : "lazy";
}

inline ReinsertionMode reinsertion_mode_from_string(std::string_view s) {
  if (s == "immediate") return ReinsertionMode::Immediate;
  if (s == "lazy") return ReinsertionMode::Lazy;
  throw ConfigError("unknown reinsertion mode: " + std::string(s));
}

struct TrainConfig {
  int steps = 1000;
  int batch_size = 32;
  double learning_rate = 1e-2;
  double ema_alpha = 0.9;
  ReinsertionMode reinsertion_mode = ReinsertionMode::Immediate;
  int reinsertion_quota = 3;
  SchemeParams scheme;
  SearchConfig search;
  std::uint64_t seed = 0;
  double init_scale = 0.01;  // std of the Gaussian parameter init
  bool shuffle = true;
  bool allow_refill = true;  // start a new epoch once the loader is drained
  // Fixed threshold in place of the EMA (e.g. +inf for no rejection).
  std::optional<double> lambda_override;
  std::size_t snapshot_samples = 200;
  bool record_prompt_free_gap = true;  // vanilla only: log dr2 of each batch
};

inline void validate_train_config(const TrainConfig& c) {
  if (c.steps < 0) throw ConfigError("steps must be non-negative");
  if (c.batch_size < 1) throw ConfigError("batch_size must be positive");
  if (!(c.learning_rate >= 0.0) || !std::isfinite(c.learning_rate)) {
    throw ConfigError("learning_rate must be finite and non-negative");
  }
  if (!(c.ema_alpha >= 0.0 && c.ema_alpha < 1.0)) {
    throw ConfigError("ema_alpha must lie in [0, 1)");
  }
  if (c.reinsertion_quota < 0) throw ConfigError("reinsertion_quota must be >= 0");
  if (!(c.init_scale >= 0.0)) throw ConfigError("init_scale must be >= 0");
  if (c.lambda_override && std::isnan(*c.lambda_override)) {
    throw ConfigError("lambda_override must not be NaN");
  }
}

// -log sigmoid(gap).
inline double bt_loss(double gap) { return softplus(-gap); }

struct BatchGradient {
  Vector gradient;
  double loss = 0.0;
};

// Mean loss and gradient over the batch.
inline BatchGradient bt_gradient(const RewardFunction& model,
                                 std::span<const PreferenceSample* const> batch) {
  if (batch.empty()) throw PreconditionError("gradient of an empty batch");
  BatchGradient out;
  out.gradient.assign(model.num_parameters(), 0.0);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const PreferenceSample* s : batch) {
    const double gap = model.gap(s->prompt, s->chosen, s->rejected);
    out.loss += bt_loss(gap) * inv;
    // d/dgap of -log sigmoid(gap) is -sigmoid(-gap)
    const double coef = -sigmoid(-gap) * inv;
    model.accumulate_gradient(s->prompt, s->chosen, coef, out.gradient);
    model.accumulate_gradient(s->prompt, s->rejected, -coef, out.gradient);
  }
  return out;
}

inline BatchGradient bt_gradient(const RewardFunction& model,
                                 std::span<const PreferenceSample> batch) {
  std::vector<const PreferenceSample*> ptrs;
  for (const auto& s : batch) ptrs.push_back(&s);
  return bt_gradient(model, std::span<const PreferenceSample* const>(ptrs));
}

inline double l2_norm(const Vector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Two-means on the real line, seeded with the extremes. Returns the midpoint
// of the final centroids.
inline double kmeans_1d_boundary(std::span<const double> values) {
  if (values.empty()) throw DegenerateClusteringError("no values to cluster");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  for (double x : v) {
    if (!std::isfinite(x)) throw DegenerateClusteringError("non-finite value");
  }
  if (v.front() == v.back()) {
    throw DegenerateClusteringError("all values are identical");
  }
  double lo = v.front();
  double hi = v.back();
  // With sorted data a cluster split is a prefix; iterate to a fixed point.
  std::size_t split = 0;
  for (int iter = 0; iter < 1000; ++iter) {
    const double boundary = 0.5 * (lo + hi);
    std::size_t next = 0;
    while (next < v.size() && v[next] <= boundary) ++next;
    // both extremes stay in their own clusters
    next = std::clamp<std::size_t>(next, 1, v.size() - 1);
    if (iter > 0 && next == split) break;
    split = next;
    double s_lo = 0.0;
    double s_hi = 0.0;
    for (std::size_t i = 0; i < split; ++i) s_lo += v[i];
    for (std::size_t i = split; i < v.size(); ++i) s_hi += v[i];
    lo = s_lo / static_cast<double>(split);
    hi = s_hi / static_cast<double>(v.size() - split);
  }
  return 0.5 * (lo + hi);
}

inline double ema_update(double lambda, double boundary, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in [0, 1)");
  return alpha * lambda + (1.0 - alpha) * boundary;
}

// Shuffled epochs over sample indices with rejection bookkeeping.
class DataCursor {
 public:
  DataCursor(std::size_t size, ReinsertionMode mode, int quota, std::uint64_t seed,
             bool shuffle = true, bool allow_refill = true)
      : size_(size),
        mode_(mode),
        quota_(quota),
        shuffle_(shuffle),
        allow_refill_(allow_refill),
        rng_(seed),
        remaining_(size, quota) {
    if (size_ == 0) throw PreconditionError("cannot iterate an empty dataset");
    start_epoch();
  }

  // Next sample index, or nothing once the loader is drained and may not
  // refill. `may_refill` lets the caller forbid a new epoch for this draw.
  std::optional<std::size_t> next(bool may_refill = true) {
    if (queue_.empty() && mode_ == ReinsertionMode::Lazy && !deferred_.empty()) {
      queue_.assign(deferred_.begin(), deferred_.end());
      deferred_.clear();
      if (shuffle_) std::shuffle(queue_.begin(), queue_.end(), rng_);
      ++passes_;
    }
    if (queue_.empty()) {
      if (!allow_refill_ || !may_refill) return std::nullopt;
      start_epoch();
    }
    const std::size_t i = queue_.front();
    queue_.pop_front();
    return i;
  }

  // Reports that sample i was drawn and rejected.
  void reject(std::size_t i) {
    if (remaining_.at(i) <= 0) {
      ++dropped_;
      return;
    }
    --remaining_[i];
    ++reinsertions_;
    if (mode_ == ReinsertionMode::Immediate) {
      queue_.push_back(i);
    } else {
      deferred_.push_back(i);
    }
  }

  int remaining_quota(std::size_t i) const { return remaining_.at(i); }
  int epoch() const { return epoch_; }
  int passes() const { return passes_; }
  std::size_t reinsertions() const { return reinsertions_; }
  std::size_t dropped() const { return dropped_; }
  std::size_t pending() const { return queue_.size() + deferred_.size(); }

 private:
  void start_epoch() {
    queue_.clear();
    deferred_.clear();
    for (std::size_t i = 0; i < size_; ++i) queue_.push_back(i);
    if (shuffle_) std::shuffle(queue_.begin(), queue_.end(), rng_);
    std::fill(remaining_.begin(), remaining_.end(), quota_);
    ++epoch_;
  }

  std::size_t size_;
  ReinsertionMode mode_;
  int quota_;
  bool shuffle_;
  bool allow_refill_;
  std::mt19937_64 rng_;
  std::deque<std::size_t> queue_;
  std::vector<std::size_t> deferred_;
  std::vector<int> remaining_;
  int epoch_ = 0;
  int passes_ = 0;
  std::size_t reinsertions_ = 0;
  std::size_t dropped_ = 0;
};

struct StepRecord {
  int step = 0;
  std::vector<std::string> accepted;
  std::vector<std::string> rejected;
  double lambda = 0.0;      // threshold used for acceptance
  double lambda_hat = 0.0;  // NaN when clustering was degenerate
  double loss = std::numeric_limits<double>::quiet_NaN();
  double grad_norm = 0.0;
};

// One accepted draw: its dr2 and the threshold it was compared with.
struct AuditEntry {
  int step = 0;
  std::string sample_id;
  double prompt_free_gap = 0.0;
  double lambda = 0.0;
};

struct TrainerState {
  RewardFunction model;
  double lambda = 0.0;
  int step = 0;
  std::vector<StepRecord> log;
  std::vector<AuditEntry> audit;
  std::vector<QuadrantSnapshot> snapshots;
  std::vector<double> boundaries;  // every lambda_hat that fed the EMA
  bool exhausted = false;          // loader ran dry before `steps`
};

// Layout matching the dataset's dimensions; length is centred on the
// midpoint of the observed range and scaled to [-1, 1].
inline FeatureLayout layout_for(const PreferenceDataset& ds) {
  if (ds.empty()) throw PreconditionError("empty dataset");
  FeatureLayout l;
  l.prompt_dim = ds.samples[0].prompt.vector.size();
  l.response_dim = ds.samples[0].chosen.vector.size();
  int lo = ds.samples[0].chosen.length;
  int hi = lo;
  for (const auto& s : ds.samples) {
    for (const auto* r : {&s.chosen, &s.rejected}) {
      lo = std::min(lo, r->length);
      hi = std::max(hi, r->length);
    }
  }
  l.length_center = 0.5 * (lo + hi);
  l.length_scale = hi > lo ? 0.5 * (hi - lo) : 1.0;
  return l;
}

inline RewardFunction initial_model(const FeatureLayout& layout,
                                    const RewardBounds& bounds, double init_scale,
                                    std::uint64_t seed) {
  Vector theta(layout.num_parameters(), 0.0);
  if (init_scale > 0.0) {
    std::mt19937_64 rng(mix_seed(seed, "init"));
    std::normal_distribution<double> normal(0.0, init_scale);
    for (double& t : theta) t = normal(rng);
  }
  return RewardFunction(layout, bounds, std::move(theta));
}

// Steps after which snapshots are taken: round(i * T / 4), i = 1..4.
inline std::vector<int> snapshot_steps(int steps) {
  std::vector<int> out;
  if (steps <= 0) return out;
  for (int i = 1; i <= 4; ++i) {
    const int s = static_cast<int>(std::lround(i * static_cast<double>(steps) / 4.0));
    if (s >= 1 && (out.empty() || out.back() != s)) out.push_back(s);
  }
  return out;
}

namespace detail {

inline void sgd_update(RewardFunction& model, const Vector& grad, double lr) {
  auto& theta = model.mutable_parameters();
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * grad[i];
}

inline void apply_batch(TrainerState& st, const PreferenceDataset& ds,
                        const std::vector<std::size_t>& batch, double lr,
                        StepRecord& rec) {
  if (batch.empty()) return;
  std::vector<const PreferenceSample*> ptrs;
  for (std::size_t i : batch) ptrs.push_back(&ds.samples[i]);
  const auto g = bt_gradient(st.model, std::span<const PreferenceSample* const>(ptrs));
  rec.loss = g.loss;
  rec.grad_norm = l2_norm(g.gradient);
  sgd_update(st.model, g.gradient, lr);
}

inline double boundary_or_nan(const std::vector<double>& drawn) {
  try {
    return kmeans_1d_boundary(drawn);
  } catch (const DegenerateClusteringError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

inline void maybe_snapshot(TrainerState& st, const PromptWeighter& weighter,
                           const TrainConfig& c, const std::vector<int>& at) {
  if (std::find(at.begin(), at.end(), st.step) == at.end()) return;
  const std::size_t n = std::min(c.snapshot_samples, weighter.dataset().size());
  st.snapshots.push_back(quadrant_snapshot(st.model, weighter, n,
                                           mix_seed(c.seed, "snapshot"), st.step,
                                           c.search));
}

}  // namespace detail

// One prioritized step. Returns false if nothing could be drawn.
inline bool prioritized_step(TrainerState& st, const PromptWeighter& weighter,
                             DataCursor& cursor, const TrainConfig& c) {
  const auto& ds = weighter.dataset();
  StepRecord rec;
  rec.step = st.step;
  rec.lambda = st.lambda;
  std::vector<std::size_t> batch;
  std::vector<double> drawn;
  const int epoch_at_start = cursor.epoch();
  while (batch.size() < static_cast<std::size_t>(c.batch_size)) {
    // At most one new epoch per step, so a threshold below every dr2 cannot
    // spin forever.
    const auto i = cursor.next(cursor.epoch() == epoch_at_start);
    if (!i) break;
    const auto& s = ds.samples[*i];
    const double d2 = decompose_pair(st.model, ds.prompt_pool, s,
                                     weighter.for_sample(*i), c.search)
                          .prompt_free_gap;
    drawn.push_back(d2);
    if (d2 < st.lambda) {
      batch.push_back(*i);
      rec.accepted.push_back(s.id);
      st.audit.push_back({st.step, s.id, d2, st.lambda});
    } else {
      rec.rejected.push_back(s.id);
      cursor.reject(*i);
    }
  }
  if (drawn.empty()) return false;
  detail::apply_batch(st, ds, batch, c.learning_rate, rec);
  rec.lambda_hat = detail::boundary_or_nan(drawn);
  if (c.lambda_override) {
    st.lambda = *c.lambda_override;
  } else if (!std::isnan(rec.lambda_hat)) {
    st.boundaries.push_back(rec.lambda_hat);
    st.lambda = ema_update(st.lambda, rec.lambda_hat, c.ema_alpha);
  }
  st.log.push_back(std::move(rec));
  ++st.step;
  return true;
}

inline TrainerState make_state(const PreferenceDataset& ds, const TrainConfig& c,
                               const RewardBounds& bounds) {
  TrainerState st{initial_model(layout_for(ds), bounds, c.init_scale, c.seed)};
  st.lambda = c.lambda_override ? *c.lambda_override : 0.0;
  return st;
}

inline TrainerState prioritized_train(const PreferenceDataset& ds,
                                      const TrainConfig& c,
                                      const RewardBounds& bounds = {},
                                      std::optional<RewardFunction> init = {}) {
  validate_train_config(c);
  TrainerState st = make_state(ds, c, bounds);
  if (init) st.model = *init;
  const PromptWeighter weighter(ds, c.scheme);
  DataCursor cursor(ds.size(), c.reinsertion_mode, c.reinsertion_quota,
                    mix_seed(c.seed, "loader"), c.shuffle, c.allow_refill);
  const auto at = snapshot_steps(c.steps);
  while (st.step < c.steps) {
    if (!prioritized_step(st, weighter, cursor, c)) {
      st.exhausted = true;
      break;
    }
    detail::maybe_snapshot(st, weighter, c, at);
  }
  return st;
}

// Uniform batching over shuffled epochs. dr2 of each batch is still computed
// (when record_prompt_free_gap is set) so that logs line up with prioritized
// runs; the logged threshold is +inf.
inline TrainerState vanilla_train(const PreferenceDataset& ds, const TrainConfig& c,
                                  const RewardBounds& bounds = {},
                                  std::optional<RewardFunction> init = {}) {
  validate_train_config(c);
  TrainerState st = make_state(ds, c, bounds);
  if (init) st.model = *init;
  st.lambda = std::numeric_limits<double>::infinity();
  const PromptWeighter weighter(ds, c.scheme);
  DataCursor cursor(ds.size(), ReinsertionMode::Immediate, 0,
                    mix_seed(c.seed, "loader"), c.shuffle, c.allow_refill);
  const auto at = snapshot_steps(c.steps);
  while (st.step < c.steps) {
    StepRecord rec;
    rec.step = st.step;
    rec.lambda = st.lambda;
    std::vector<std::size_t> batch;
    std::vector<double> drawn;
    const int epoch_at_start = cursor.epoch();
    while (batch.size() < static_cast<std::size_t>(c.batch_size)) {
      const auto i = cursor.next(cursor.epoch() == epoch_at_start);
      if (!i) break;
      batch.push_back(*i);
      rec.accepted.push_back(ds.samples[*i].id);
      if (c.record_prompt_free_gap) {
        drawn.push_back(decompose_pair(st.model, ds.prompt_pool, ds.samples[*i],
                                       weighter.for_sample(*i), c.search)
                            .prompt_free_gap);
      }
    }
    if (batch.empty()) {
      st.exhausted = true;
      break;
    }
    detail::apply_batch(st, ds, batch, c.learning_rate, rec);
    rec.lambda_hat = c.record_prompt_free_gap
                         ? detail::boundary_or_nan(drawn)
                         : std::numeric_limits<double>::quiet_NaN();
    st.log.push_back(std::move(rec));
    ++st.step;
    detail::maybe_snapshot(st, weighter, c, at);
  }
  return st;
}

inline std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ';';
    out += ids[i];
  }
  return out;
}

inline void write_step_log_csv(const std::filesystem::path& path,
                               const std::vector<StepRecord>& log) {
  std::string out = "step,accepted_ids,rejected_ids,lambda,lambda_hat,loss,grad_norm\n";
  for (const auto& r : log) {
    out += std::to_string(r.step) + "," + join_ids(r.accepted) + "," +
           join_ids(r.rejected) + "," + fmt_double(r.lambda) + "," +
           fmt_double(r.lambda_hat) + "," + fmt_double(r.loss) + "," +
           fmt_double(r.grad_norm) + "\n";
  }
  write_file(path, out);
}

}  // namespace pfr

#endif  // PFR_TRAINER_HPP_
