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
#include <set>

#include <gtest/gtest.h>

#include "pfr/error.hpp"
#include "pfr/eval.hpp"
#include "pfr/io.hpp"
#include "pfr/synth.hpp"
#include "test_util.hpp"

namespace pfr {
namespace {

using testing::gap_dataset;
using testing::unit_model;

TEST(SampleIndices, DistinctSortedAndSeeded) {
  const auto a = sample_indices(100, 30, 5);
  EXPECT_EQ(a.size(), 30u);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_EQ(std::set<std::size_t>(a.begin(), a.end()).size(), 30u);
  EXPECT_EQ(a, sample_indices(100, 30, 5));
  EXPECT_NE(a, sample_indices(100, 30, 6));
  EXPECT_EQ(sample_indices(10, 10, 1).back(), 9u);
  EXPECT_THROW(sample_indices(3, 4, 0), PreconditionError);
}

TEST(Accuracy, CountsTiesAsHalf) {
  const auto ds = gap_dataset({1.0, -2.0, 0.0, 3.0});
  EXPECT_DOUBLE_EQ(heldout_accuracy(unit_model(), ds), (1 + 0 + 0.5 + 1) / 4.0);
  EXPECT_THROW(heldout_accuracy(unit_model(), PreferenceDataset{}), PreconditionError);
}

TEST(Accuracy, PerGroup) {
  auto ds = gap_dataset({1.0, -2.0, 3.0});
  ds.samples[0].group = Group::ChosenLonger;
  ds.samples[1].group = Group::ChosenLonger;
  ds.samples[2].group = Group::ChosenShorter;
  const auto g = group_accuracy(unit_model(), ds);
  EXPECT_DOUBLE_EQ(g.at("chosen_longer"), 0.5);
  EXPECT_DOUBLE_EQ(g.at("chosen_shorter"), 1.0);
}

TEST(Quadrant, SnapshotMatchesPerPairDecomposition) {
  const auto ds = gen_enumerable_dataset(4, 5, 8, 3, 3, 2);
  std::mt19937_64 rng(2);
  const auto m = testing::gaussian_model(3, 3, 0.5, rng);
  const SchemeParams sp{Scheme::ExactBayes, 1, 1.0, 0};
  const auto snap = quadrant_snapshot(m, ds, sp, 5, 11, 7);
  EXPECT_EQ(snap.step, 7);
  EXPECT_EQ(snap.parameters, m.parameters());
  ASSERT_EQ(snap.records.size(), 5u);
  for (std::size_t r = 0; r < 5; ++r) {
    const auto& s = ds.samples[snap.sample_indices[r]];
    const auto d = decompose_pair(m, ds.prompt_pool, s,
                                  exact_bayes_weights(ds, s.chosen, s.rejected));
    EXPECT_EQ(snap.records[r].sample_id, s.id);
    EXPECT_DOUBLE_EQ(snap.records[r].dr2, d.prompt_free_gap);
    EXPECT_DOUBLE_EQ(snap.records[r].dr1 + snap.records[r].dr2, snap.records[r].total);
  }
}

TEST(Quadrant, GroupMeans) {
  QuadrantSnapshot s;
  s.records = {{"a", 0, 1.0, 1.0, Group::ChosenLonger},
               {"b", 0, 3.0, 3.0, Group::ChosenLonger},
               {"c", 0, -2.0, -2.0, Group::ChosenShorter}};
  EXPECT_DOUBLE_EQ(mean_prompt_free_gap(s), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(mean_prompt_free_gap(s, Group::ChosenLonger), 2.0);
  EXPECT_TRUE(std::isnan(mean_prompt_free_gap(s, Group::Adversarial)));
}

TEST(ReplacementGaps, MeanAndPopulationStd) {
  const auto ds = gen_enumerable_dataset(5, 4, 4, 2, 2, 6);
  std::mt19937_64 rng(6);
  const auto m = testing::gaussian_model(2, 2, 0.8, rng);
  const auto gaps = prompt_replacement_gaps(m, ds, 4, 1);
  ASSERT_EQ(gaps.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& s = ds.samples[i];
    // four replacements out of four other prompts: all of them
    std::vector<double> v;
    for (const auto& x : ds.prompt_pool) {
      if (x.id != s.prompt.id) v.push_back(m.gap(x, s.chosen, s.rejected));
    }
    double mean = 0.0;
    for (double g : v) mean += g / v.size();
    double var = 0.0;
    for (double g : v) var += (g - mean) * (g - mean) / v.size();
    EXPECT_NEAR(gaps[i].replaced_mean, mean, 1e-12);
    EXPECT_NEAR(gaps[i].replaced_std, std::sqrt(var), 1e-12);
    EXPECT_EQ(gaps[i].original_gap, m.gap(s.prompt, s.chosen, s.rejected));
  }
  EXPECT_THROW(prompt_replacement_gaps(m, ds, 5, 1), PreconditionError);
  const auto none = prompt_replacement_gaps(m, ds, 0, 1);
  EXPECT_TRUE(std::isnan(none[0].replaced_mean));
}

TEST(Csv, QuadrantAndReplacementSchemas) {
  const auto dir = testing::temp_dir("csv");
  QuadrantSnapshot s;
  s.step = 3;
  s.records = {{"s1", 0.5, -0.25, 0.25, Group::ChosenShorter}};
  write_quadrant_csv(dir / "q.csv", s);
  EXPECT_EQ(read_file(dir / "q.csv"),
            "step,sample_id,dr1,dr2,group\n3,s1,0.5,-0.25,chosen_shorter\n");
  write_replacement_csv(dir / "r.csv", {{"s1", 1.0, 0.5, 0.0, 2}});
  EXPECT_EQ(read_file(dir / "r.csv"),
            "sample_id,original_gap,replaced_mean,replaced_std,replacements\n"
            "s1,1,0.5,0,2\n");
}

TEST(FmtDouble, RoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.123456789}) {
    EXPECT_EQ(std::stod(fmt_double(v)), v);
  }
  EXPECT_EQ(fmt_double(NAN), "nan");
  EXPECT_EQ(fmt_double(-INFINITY), "-inf");
}

}  // namespace
}  // namespace pfr
