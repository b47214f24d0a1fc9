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
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "pfr/error.hpp"
#include "pfr/io.hpp"
#include "pfr/synth.hpp"
#include "test_util.hpp"

namespace pfr {
namespace {

WorldConfig small_config(std::uint64_t seed = 3) {
  WorldConfig c;
  c.n_prompts = 40;
  c.n_samples = 600;
  c.seed = seed;
  return c;
}

TEST(BaseDataset, IsValidAndDeterministic) {
  const auto a = gen_base_dataset(small_config());
  const auto b = gen_base_dataset(small_config());
  EXPECT_NO_THROW(validate_dataset(a));
  ASSERT_EQ(a.size(), 600u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.samples[i].id, b.samples[i].id);
    EXPECT_EQ(a.samples[i].chosen.id, b.samples[i].chosen.id);
  }
  const auto c = gen_base_dataset(small_config(4));
  EXPECT_NE(a.samples[0].chosen.vector, c.samples[0].chosen.vector);
}

TEST(BaseDataset, LabelsFollowTheOracle) {
  // Labels are Bernoulli(sigmoid(oracle gap)); the mean log-likelihood of the
  // observed labels must match its expectation.
  const World w(small_config());
  const auto ds = gen_base_dataset(w);
  double observed = 0.0;
  double expected = 0.0;
  for (const auto& s : ds.samples) {
    const double g = w.oracle_gap(s.prompt, s.chosen, s.rejected);
    observed += sigmoid(g) > 0.5 ? 1.0 : 0.0;
    expected += std::max(sigmoid(g), 1.0 - sigmoid(g));
  }
  EXPECT_NEAR(observed / ds.size(), expected / ds.size(), 0.06);
}

TEST(BaseDataset, ResponsesComeFromThePromptSupport) {
  const World w(small_config());
  const auto ds = gen_base_dataset(w);
  const auto index = ds.prompt_index();
  for (const auto& s : ds.samples) {
    std::set<std::string> sup;
    for (std::size_t r : w.support(index.at(s.prompt.id))) sup.insert(w.responses()[r].id);
    EXPECT_TRUE(sup.count(s.chosen.id));
    EXPECT_TRUE(sup.count(s.rejected.id));
    EXPECT_NE(s.chosen.id, s.rejected.id);
  }
}

TEST(LengthBiased, HitsTheRequestedFraction) {
  const auto base = gen_base_dataset(small_config());
  const auto ds = make_length_biased(base, 0.8, 1);
  double longer = 0.0;
  for (const auto& s : ds.samples) {
    EXPECT_EQ(s.group, length_group(s.chosen, s.rejected));
    longer += s.group == Group::ChosenLonger ? 1.0 : 0.0;
  }
  EXPECT_NEAR(longer / ds.size(), 0.8, 0.01);
  EXPECT_THROW(make_length_biased(base, 1.0, 1), ConfigError);
  EXPECT_THROW(make_length_biased(base, 0.1, 1), PreconditionError);
}

TEST(Adversarial, TwinsSwapLabelsUnderDirectivePrompts) {
  const auto base = gen_base_dataset(small_config());
  const auto ds = make_adversarial(base, 0.5, 2);
  EXPECT_NO_THROW(validate_dataset(ds));
  std::map<std::string, const PreferenceSample*> by_id;
  for (const auto& s : ds.samples) by_id[s.id] = &s;
  std::size_t twins = 0;
  for (const auto& s : ds.samples) {
    if (s.group != Group::Adversarial) continue;
    ++twins;
    const auto& orig = *by_id.at(s.id.substr(0, s.id.size() - 4));
    EXPECT_EQ(orig.group, Group::Original);
    EXPECT_EQ(s.chosen.id, orig.rejected.id);
    EXPECT_EQ(s.rejected.id, orig.chosen.id);
    EXPECT_EQ(s.prompt.vector, orig.prompt.vector);
    // the twin asks for the response that was rejected
    const int want = orig.chosen.length > orig.rejected.length ? -1 : 1;
    EXPECT_EQ(s.prompt.directive, want);
    EXPECT_EQ(s.prompt.id, twin_prompt_id(orig.prompt.id, want));
  }
  EXPECT_EQ(twins, 300u);
  EXPECT_EQ(ds.size(), 900u);
  EXPECT_THROW(make_adversarial(base, 1.5, 2), ConfigError);
  EXPECT_EQ(make_adversarial(base, 0.0, 2).size(), base.size());
}

TEST(Heldout, LabelsAreOracleSigns) {
  const World w(small_config());
  for (const auto& ds : {heldout_recombined(w, 200, 1), heldout_fresh(w, 200, 1)}) {
    EXPECT_EQ(ds.size(), 200u);
    EXPECT_NO_THROW(validate_dataset(ds));
    for (const auto& s : ds.samples) {
      EXPECT_GT(w.oracle_gap(s.prompt, s.chosen, s.rejected), 0.0);
      EXPECT_EQ(s.prompt.directive, 0);
    }
  }
}

TEST(Heldout, RecombinedPairsUseAnotherPrompt) {
  const World w(small_config());
  const auto ds = heldout_recombined(w, 100, 5);
  const auto base = gen_base_dataset(w);
  const auto index = base.prompt_index();
  for (const auto& s : ds.samples) {
    std::set<std::string> sup;
    for (std::size_t r : w.support(index.at(s.prompt.id))) sup.insert(w.responses()[r].id);
    EXPECT_FALSE(sup.count(s.chosen.id));
  }
}

TEST(Io, DatasetRoundTripIsLossless) {
  const auto dir = testing::temp_dir("io");
  const auto ds = make_adversarial(gen_base_dataset(small_config()), 0.3, 1);
  write_dataset(dir / "d", ds);
  const auto back = read_dataset(dir / "d");
  ASSERT_EQ(back.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& a = ds.samples[i];
    const auto& b = back.samples[i];
    EXPECT_EQ(a.id, b.id);
    EXPECT_EQ(a.prompt.vector, b.prompt.vector);
    EXPECT_EQ(a.prompt.directive, b.prompt.directive);
    EXPECT_EQ(a.chosen.vector, b.chosen.vector);
    EXPECT_EQ(a.rejected.length, b.rejected.length);
    EXPECT_EQ(a.group, b.group);
  }
  EXPECT_EQ(back.prompt_weights, ds.prompt_weights);
  ASSERT_TRUE(back.generation_model.has_value());
  const auto& x = ds.prompt_pool.back().id;
  const auto& y = ds.samples[0].chosen.id;
  EXPECT_EQ(back.generation_model->at(x, y), ds.generation_model->at(x, y));
  // writing again gives identical bytes
  write_dataset(dir / "e", back);
  EXPECT_EQ(read_file(dir / "d" / "samples.jsonl"), read_file(dir / "e" / "samples.jsonl"));
}

TEST(Io, MissingDatasetIsAnIoError) {
  EXPECT_THROW(read_dataset("/nonexistent/pfr"), IoError);
}

TEST(Multiplicative, RewardLevelsScaleWithLength) {
  auto c = small_config();
  const auto mw = make_multiplicative_gt(c, 0.0);
  const auto& s = mw.dataset.samples[0];
  const double c_len = mean_response_length(mw.dataset);
  const double r = mw.scorer.reward(s.prompt, s.chosen, s.rejected);
  const double level = mw.scorer.r1_level(s.prompt, s.chosen, s.rejected);
  EXPECT_NEAR(r, level * s.chosen.length / c_len, 1e-12);
  for (const auto& t : mw.dataset.samples) {
    const double g = mw.scorer.gap(t.prompt, t.chosen, t.rejected);
    EXPECT_LE(std::abs(g), mw.scorer.gap_bound());
  }
}

TEST(EnumerableDataset, HasRequestedShape) {
  const auto ds = gen_enumerable_dataset(4, 5, 7, 2, 3, 1);
  EXPECT_EQ(ds.prompt_pool.size(), 4u);
  EXPECT_EQ(ds.size(), 7u);
  EXPECT_NO_THROW(validate_dataset(ds));
  EXPECT_THROW(gen_enumerable_dataset(0, 2, 1, 1, 1, 0), ConfigError);
}

TEST(WorldConfig, Validation) {
  WorldConfig c;
  c.n_prompts = 1;
  EXPECT_THROW(validate_world(c), ConfigError);
  c = {};
  c.label_noise = 0.5;
  EXPECT_THROW(validate_world(c), ConfigError);
  c = {};
  c.length_min = 10;
  c.length_max = 5;
  EXPECT_THROW(validate_world(c), ConfigError);
}

}  // namespace
}  // namespace pfr
