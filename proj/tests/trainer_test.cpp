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


#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "pfr/error.hpp"
#include "pfr/io.hpp"
#include "pfr/synth.hpp"
#include "pfr/trainer.hpp"
#include "test_util.hpp"

namespace pfr {
namespace {

using testing::gap_dataset;
using testing::unit_model;

TrainConfig trace_config() {
  TrainConfig c;
  c.steps = 3;
  c.batch_size = 2;
  c.learning_rate = 0.0;
  c.ema_alpha = 0.5;
  c.reinsertion_quota = 1;
  c.shuffle = false;
  c.init_scale = 0.0;
  c.scheme = {Scheme::PessimisticFixedP, 1, 1.0, 0};
  c.search = {1e-12, 64};
  c.snapshot_samples = 0;
  return c;
}

using Ids = std::vector<std::string>;

TEST(PrioritizedTrace, ThreeStepsByHand) {
  // One prompt, so dr2 equals the total gap. Gaps by sample: s0 -1, s1 3,
  // s2 -3, s3 1, s4 -2; lambda starts at 0, alpha = 1/2, quota 1.
  //
  // step 0, lambda 0: s0 in, s1 out (requeued), s2 in.
  //   drawn {-1, 3, -3}: clusters {-3, -1} {3}, boundary (-2 + 3) / 2 = 1/2.
  //   lambda <- 0/2 + (1/2)/2 = 1/4.
  // step 1, lambda 1/4, queue [s3 s4 s1]: s3 out (requeued), s4 in,
  //   s1 out (quota spent, dropped), s3 out (dropped); new epoch, s0 in.
  //   drawn {1, -2, 3, 1, -1}: clusters {-2, -1} {1, 1, 3}, boundary
  //   (-3/2 + 5/3) / 2 = 1/12. lambda <- 1/8 + 1/24 = 1/6.
  // step 2, lambda 1/6, queue [s1 s2 s3 s4]: s1 out, s2 in, s3 out, s4 in.
  //   drawn {3, -3, 1, -2}: clusters {-3, -2} {1, 3}, boundary -1/4.
  //   lambda <- 1/12 - 1/8 = -1/24.
  const auto ds = gap_dataset({-1.0, 3.0, -3.0, 1.0, -2.0});
  const auto st = prioritized_train(ds, trace_config(), RewardBounds{}, unit_model());
  ASSERT_EQ(st.log.size(), 3u);
  EXPECT_EQ(st.log[0].accepted, (Ids{"s0", "s2"}));
  EXPECT_EQ(st.log[0].rejected, (Ids{"s1"}));
  EXPECT_EQ(st.log[1].accepted, (Ids{"s4", "s0"}));
  EXPECT_EQ(st.log[1].rejected, (Ids{"s3", "s1", "s3"}));
  EXPECT_EQ(st.log[2].accepted, (Ids{"s2", "s4"}));
  EXPECT_EQ(st.log[2].rejected, (Ids{"s1", "s3"}));
  const double tol = 1e-10;
  EXPECT_EQ(st.log[0].lambda, 0.0);
  EXPECT_NEAR(st.log[0].lambda_hat, 0.5, tol);
  EXPECT_NEAR(st.log[1].lambda, 0.25, tol);
  EXPECT_NEAR(st.log[1].lambda_hat, 1.0 / 12, tol);
  EXPECT_NEAR(st.log[2].lambda, 1.0 / 6, tol);
  EXPECT_NEAR(st.log[2].lambda_hat, -0.25, tol);
  EXPECT_NEAR(st.lambda, -1.0 / 24, tol);
  EXPECT_EQ(st.model.parameters(), unit_model().parameters());
}

TEST(PrioritizedTrace, LazyModeDefersRejections) {
  // Same gaps, lazy reinsertion: rejected samples wait for the queue to
  // drain. Step 0 as before; step 1 draws s3 (out, deferred), s4 (in),
  // then the queue is empty so the deferred pass [s1, s3] starts: both out,
  // quota spent; then a new epoch gives s0 (in).
  const auto ds = gap_dataset({-1.0, 3.0, -3.0, 1.0, -2.0});
  auto c = trace_config();
  c.reinsertion_mode = ReinsertionMode::Lazy;
  c.steps = 2;
  const auto st = prioritized_train(ds, c, RewardBounds{}, unit_model());
  EXPECT_EQ(st.log[0].accepted, (Ids{"s0", "s2"}));
  EXPECT_EQ(st.log[1].accepted, (Ids{"s4", "s0"}));
  EXPECT_EQ(st.log[1].rejected, (Ids{"s3", "s1", "s3"}));
}

TEST(PrioritizedTrace, StopsWhenLoaderIsDrained) {
  const auto ds = gap_dataset({1.0, 2.0, 3.0});
  auto c = trace_config();
  c.allow_refill = false;
  c.reinsertion_quota = 0;
  c.steps = 5;
  const auto st = prioritized_train(ds, c, RewardBounds{}, unit_model());
  // everything is rejected at lambda = 0 and nothing can come back
  EXPECT_TRUE(st.exhausted);
  EXPECT_EQ(st.log.size(), 1u);
  EXPECT_TRUE(st.log[0].accepted.empty());
  EXPECT_TRUE(std::isnan(st.log[0].loss));
}

TEST(Ema, ClosedFormUnderConstantBoundary) {
  const double c = 0.731;
  for (double alpha : {0.0, 0.5, 0.9, 0.99}) {
    double lambda = 0.0;
    for (int t = 1; t <= 200; ++t) {
      lambda = ema_update(lambda, c, alpha);
      EXPECT_NEAR(lambda, c * (1.0 - std::pow(alpha, t)), 1e-12);
    }
  }
  EXPECT_THROW(ema_update(0.0, 1.0, 1.0), ConfigError);
}

TEST(Ema, TrainerFollowsClosedForm) {
  // Gaps {-1, 3}: every step draws both values (possibly one twice), so the
  // boundary is 1 throughout.
  const auto ds = gap_dataset({-1.0, 3.0});
  auto c = trace_config();
  c.lambda_override.reset();
  c.batch_size = 2;
  c.steps = 12;
  c.ema_alpha = 0.8;
  c.reinsertion_quota = 0;
  const auto st = prioritized_train(ds, c, RewardBounds{}, unit_model());
  for (std::size_t t = 0; t < st.log.size(); ++t) {
    EXPECT_NEAR(st.log[t].lambda_hat, 1.0, 1e-10);
    EXPECT_NEAR(st.log[t].lambda, 1.0 - std::pow(0.8, static_cast<double>(t)), 1e-10);
  }
}

double brute_force_boundary(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double best = std::numeric_limits<double>::infinity();
  double out = 0.0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < k; ++i) a += v[i];
    for (std::size_t i = k; i < v.size(); ++i) b += v[i];
    a /= k;
    b /= (v.size() - k);
    double sse = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) sse += std::pow(v[i] - (i < k ? a : b), 2);
    if (sse < best) {
      best = sse;
      out = 0.5 * (a + b);
    }
  }
  return out;
}

TEST(KMeans, MatchesOptimalSplitOnBimodalData) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.0, 0.5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v;
    for (int i = 0; i < 10 + trial; ++i) v.push_back(n(rng) - 3.0);
    for (int i = 0; i < 5 + trial; ++i) v.push_back(n(rng) + 2.0);
    std::shuffle(v.begin(), v.end(), rng);
    EXPECT_NEAR(kmeans_1d_boundary(v), brute_force_boundary(v), 1e-12);
  }
}

TEST(KMeans, DegenerateInputs) {
  EXPECT_THROW(kmeans_1d_boundary(std::vector<double>{}), DegenerateClusteringError);
  EXPECT_THROW(kmeans_1d_boundary(std::vector<double>{2.0, 2.0}), DegenerateClusteringError);
  EXPECT_THROW(kmeans_1d_boundary(std::vector<double>{1.0, NAN}), DegenerateClusteringError);
  EXPECT_DOUBLE_EQ(kmeans_1d_boundary(std::vector<double>{1.0, 3.0}), 2.0);
}

TEST(DataCursor, ImmediateReinsertionGoesToTheBack) {
  DataCursor c(3, ReinsertionMode::Immediate, 2, 0, false);
  EXPECT_EQ(*c.next(), 0u);
  c.reject(0);
  EXPECT_EQ(*c.next(), 1u);
  EXPECT_EQ(*c.next(), 2u);
  EXPECT_EQ(*c.next(), 0u);
  c.reject(0);
  EXPECT_EQ(c.remaining_quota(0), 0);
  EXPECT_EQ(*c.next(), 0u);
  c.reject(0);
  EXPECT_EQ(c.dropped(), 1u);
  EXPECT_EQ(c.reinsertions(), 2u);
  EXPECT_EQ(c.epoch(), 1);
  EXPECT_FALSE(c.next(false).has_value());
  EXPECT_EQ(*c.next(), 0u);
  EXPECT_EQ(c.epoch(), 2);
  EXPECT_EQ(c.remaining_quota(0), 2);
}

TEST(DataCursor, LazyPassesAndNoRefill) {
  DataCursor c(2, ReinsertionMode::Lazy, 1, 0, false, false);
  EXPECT_EQ(*c.next(), 0u);
  c.reject(0);
  EXPECT_EQ(c.pending(), 2u);
  EXPECT_EQ(*c.next(), 1u);
  EXPECT_EQ(*c.next(), 0u);
  EXPECT_EQ(c.passes(), 1);
  EXPECT_FALSE(c.next().has_value());
}

TEST(DataCursor, ShuffledEpochsArePermutations) {
  DataCursor c(50, ReinsertionMode::Immediate, 0, 9, true);
  for (int epoch = 0; epoch < 3; ++epoch) {
    std::vector<int> seen(50, 0);
    for (int i = 0; i < 50; ++i) ++seen[*c.next()];
    for (int s : seen) EXPECT_EQ(s, 1);
  }
  EXPECT_THROW(DataCursor(0, ReinsertionMode::Immediate, 0, 0), PreconditionError);
}

TEST(BtGradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  const auto ds = gen_enumerable_dataset(3, 6, 10, 3, 3, 21);
  for (int trial = 0; trial < 10; ++trial) {
    auto m = testing::gaussian_model(3, 3, 0.4, rng);
    const auto g = bt_gradient(m, std::span<const PreferenceSample>(ds.samples));
    auto loss = [&] {
      double l = 0.0;
      for (const auto& s : ds.samples) l += bt_loss(m.gap(s.prompt, s.chosen, s.rejected));
      return l / static_cast<double>(ds.size());
    };
    EXPECT_NEAR(g.loss, loss(), 1e-12);
    Vector fd(m.num_parameters());
    for (std::size_t i = 0; i < fd.size(); ++i) {
      auto& t = m.mutable_parameters();
      const double keep = t[i];
      const double h = 1e-5;
      t[i] = keep + h;
      const double up = loss();
      t[i] = keep - h;
      const double down = loss();
      t[i] = keep;
      fd[i] = (up - down) / (2 * h);
    }
    Vector diff(fd.size());
    for (std::size_t i = 0; i < fd.size(); ++i) diff[i] = fd[i] - g.gradient[i];
    EXPECT_LE(l2_norm(diff) / l2_norm(g.gradient), 1e-5);
  }
}

TEST(BtGradient, SaturatedBatchHasNoGradient) {
  const auto ds = gap_dataset({2.0, -1.0});
  FeatureLayout l{1, 1, 10.0, 1.0};
  Vector theta(l.num_parameters(), 0.0);
  theta[0] = 100.0;  // every score lands deep in the tanh tails
  const RewardFunction m(l, RewardBounds{}, theta);
  const auto g = bt_gradient(m, std::span<const PreferenceSample>(ds.samples));
  EXPECT_LT(l2_norm(g.gradient), 1e-6);
}

TEST(Vanilla, LogsInfiniteThresholdAndBoundary) {
  const auto ds = gap_dataset({-1.0, 3.0, -3.0, 1.0});
  auto c = trace_config();
  c.steps = 2;
  const auto st = vanilla_train(ds, c, RewardBounds{}, unit_model());
  for (const auto& r : st.log) {
    EXPECT_TRUE(std::isinf(r.lambda));
    EXPECT_TRUE(r.rejected.empty());
    EXPECT_EQ(r.accepted.size(), 2u);
  }
  EXPECT_NEAR(st.log[0].lambda_hat, 1.0, 1e-10);  // {-1, 3}
}

TEST(Override, InfiniteThresholdReproducesVanilla) {
  WorldConfig wc;
  wc.n_prompts = 30;
  wc.n_samples = 300;
  wc.seed = 4;
  const auto ds = gen_base_dataset(wc);
  TrainConfig c;
  c.steps = 40;
  c.batch_size = 16;
  c.seed = 4;
  c.scheme = {Scheme::PessimisticFixedP, 4, 0.5, 4};
  c.snapshot_samples = 20;
  const auto v = vanilla_train(ds, c);
  c.lambda_override = std::numeric_limits<double>::infinity();
  const auto p = prioritized_train(ds, c);
  EXPECT_EQ(v.model.parameters(), p.model.parameters());
  ASSERT_EQ(v.log.size(), p.log.size());
  for (std::size_t t = 0; t < v.log.size(); ++t) {
    EXPECT_EQ(v.log[t].accepted, p.log[t].accepted);
    EXPECT_TRUE(p.log[t].rejected.empty());
  }
}

TEST(Training, SnapshotStepsAndDeterminism) {
  EXPECT_EQ(snapshot_steps(1500), (std::vector<int>{375, 750, 1125, 1500}));
  EXPECT_EQ(snapshot_steps(2), (std::vector<int>{1, 2}));
  EXPECT_TRUE(snapshot_steps(0).empty());
  WorldConfig wc;
  wc.n_prompts = 20;
  wc.n_samples = 200;
  const auto ds = gen_base_dataset(wc);
  TrainConfig c;
  c.steps = 20;
  c.batch_size = 8;
  c.scheme = {Scheme::PessimisticFixedP, 4, 0.5, 0};
  c.snapshot_samples = 30;
  const auto a = prioritized_train(ds, c);
  const auto b = prioritized_train(ds, c);
  EXPECT_EQ(a.model.parameters(), b.model.parameters());
  ASSERT_EQ(a.snapshots.size(), 4u);
  EXPECT_EQ(a.snapshots[3].step, 20);
  EXPECT_EQ(a.snapshots[0].records.size(), 30u);
}

TEST(Training, LossDecreasesOnCleanData) {
  WorldConfig wc;
  wc.n_prompts = 40;
  wc.n_samples = 600;
  const auto ds = gen_base_dataset(wc);
  TrainConfig c;
  c.steps = 300;
  c.learning_rate = 0.05;
  c.scheme = {Scheme::PessimisticFixedP, 4, 0.5, 0};
  c.snapshot_samples = 0;
  c.record_prompt_free_gap = false;
  const auto st = vanilla_train(ds, c);
  double early = 0.0, late = 0.0;
  for (int t = 0; t < 20; ++t) {
    early += st.log[t].loss;
    late += st.log[st.log.size() - 1 - t].loss;
  }
  EXPECT_LT(late, early);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.batch_size = 0;
  EXPECT_THROW(validate_train_config(c), ConfigError);
  c = {};
  c.ema_alpha = 1.0;
  EXPECT_THROW(validate_train_config(c), ConfigError);
  c = {};
  c.learning_rate = -1.0;
  EXPECT_THROW(validate_train_config(c), ConfigError);
  c = {};
  c.lambda_override = std::nan("");
  EXPECT_THROW(validate_train_config(c), ConfigError);
  EXPECT_THROW(reinsertion_mode_from_string("later"), ConfigError);
}

TEST(StepLog, CsvSchema) {
  const auto dir = testing::temp_dir("steplog");
  StepRecord r;
  r.step = 0;
  r.accepted = {"a", "b"};
  r.rejected = {"c"};
  r.lambda = std::numeric_limits<double>::infinity();
  r.lambda_hat = 0.5;
  r.loss = 0.25;
  r.grad_norm = 1.0;
  write_step_log_csv(dir / "log.csv", {r});
  EXPECT_EQ(read_file(dir / "log.csv"),
            "step,accepted_ids,rejected_ids,lambda,lambda_hat,loss,grad_norm\n"
            "0,a;b,c,inf,0.5,0.25,1\n");
}

}  // namespace
}  // namespace pfr
