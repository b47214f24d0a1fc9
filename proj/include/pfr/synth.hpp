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

// Synthetic preference worlds with a known oracle.
//
// Every prompt owns a small support of responses. The oracle gap is
//
//   g(x, y1, y2) = a * x^T M (y1 - y2)            prompt-related part
//                + b * u^T (y1 - y2)              response quality
//                + beta * dl                      length bias
//                + gamma * directive(x) * dl      length directive
//
// with dl = (|y1| - |y2|) / half length range. Labels are Bradley-Terry draws
// from sigmoid(g), optionally flipped with probability label_noise.
//
// P(y | x) is a softmax over the whole response pool with logit
// own_bonus * [y in support(x)] + tau * x^T A y, so every prompt assigns
// positive mass to every response and exact Bayes weights are defined.

#ifndef PFR_SYNTH_HPP_
#define PFR_SYNTH_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pfr/conditional.hpp"
#include "pfr/core.hpp"
#include "pfr/dataset.hpp"
#include "pfr/error.hpp"

namespace pfr {

struct OracleConfig {
  double prompt_scale = 2.0;        // a
  double quality_scale = 0.0;       // b
  double length_bias = 0.0;         // beta
  double directive_strength = 4.0;  // gamma
};

struct WorldConfig {
  int n_prompts = 200;
  int n_samples = 3000;
  int d_x = 8;
  int d_y = 8;
  int length_min = 20;
  int length_max = 400;
  int support = 4;
  double own_bonus = 0.0;
  double generation_temperature = 0.0;  // tau
  double label_noise = 0.0;
  OracleConfig oracle;
  std::uint64_t seed = 0;
};

inline void validate_world(const WorldConfig& c) {
  if (c.n_prompts < 2) throw ConfigError("n_prompts must be at least 2");
  if (c.n_samples < 1) throw ConfigError("n_samples must be positive");
  if (c.d_x < 1 || c.d_y < 1) throw ConfigError("dimensions must be positive");
  if (c.length_min < 1 || c.length_max < c.length_min) {
    throw ConfigError("length range must satisfy 1 <= min <= max");
  }
  if (c.support < 2) throw ConfigError("support must hold at least 2 responses");
  if (!(c.label_noise >= 0.0 && c.label_noise < 0.5)) {
    throw ConfigError("label_noise must lie in [0, 0.5)");
  }
}

inline std::string padded_id(char prefix, std::size_t n, int width = 5) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, n);
  return buf;
}

class World {
 public:
  explicit World(WorldConfig config) : config_(std::move(config)) {
    validate_world(config_);
    std::mt19937_64 rng(mix_seed(config_.seed, "world"));
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto dx = static_cast<std::size_t>(config_.d_x);
    const auto dy = static_cast<std::size_t>(config_.d_y);
    const double mscale = 1.0 / std::sqrt(static_cast<double>(dx * dy));
    m_.resize(dx * dy);
    for (double& v : m_) v = normal(rng) * mscale;
    a_.resize(dx * dy);
    for (double& v : a_) v = normal(rng) * mscale;
    u_.resize(dy);
    for (double& v : u_) v = normal(rng) / std::sqrt(static_cast<double>(dy));
    Vector logw;
    for (int p = 0; p < config_.n_prompts; ++p) {
      prompts_.push_back(random_prompt(padded_id('x', p), rng));
      logw.push_back(0.5 * normal(rng));
      std::vector<std::size_t> sup;
      for (int k = 0; k < config_.support; ++k) {
        sup.push_back(responses_.size());
        responses_.push_back(random_response(padded_id('y', responses_.size()), rng));
      }
      support_.push_back(std::move(sup));
    }
    weights_ = detail::normalize_log_weights(logw);
  }

  const WorldConfig& config() const { return config_; }
  const std::vector<PromptFeatures>& prompts() const { return prompts_; }
  const Vector& prompt_weights() const { return weights_; }
  const std::vector<ResponseFeatures>& responses() const { return responses_; }
  const std::vector<std::size_t>& support(std::size_t prompt) const {
    return support_.at(prompt);
  }

  double half_length_range() const {
    return std::max(0.5 * (config_.length_max - config_.length_min), 1.0);
  }

  double prompt_related_gap(const PromptFeatures& x, const ResponseFeatures& y1,
                            const ResponseFeatures& y2) const {
    const auto dy = static_cast<std::size_t>(config_.d_y);
    double s = 0.0;
    for (std::size_t i = 0; i < x.vector.size(); ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < dy; ++j) {
        row += m_[i * dy + j] * (y1.vector[j] - y2.vector[j]);
      }
      s += x.vector[i] * row;
    }
    return config_.oracle.prompt_scale * s;
  }

  double oracle_gap(const PromptFeatures& x, const ResponseFeatures& y1,
                    const ResponseFeatures& y2) const {
    double q = 0.0;
    for (std::size_t j = 0; j < u_.size(); ++j) q += u_[j] * (y1.vector[j] - y2.vector[j]);
    const double dl = (y1.length - y2.length) / half_length_range();
    const auto& o = config_.oracle;
    return prompt_related_gap(x, y1, y2) + o.quality_scale * q + o.length_bias * dl +
           o.directive_strength * x.directive * dl;
  }

  double generation_logit(const PromptFeatures& x, std::size_t prompt,
                          std::size_t response) const {
    const auto& sup = support_[prompt];
    const bool own = std::find(sup.begin(), sup.end(), response) != sup.end();
    const auto dy = static_cast<std::size_t>(config_.d_y);
    const auto& y = responses_[response];
    double s = 0.0;
    for (std::size_t i = 0; i < x.vector.size(); ++i) {
      for (std::size_t j = 0; j < dy; ++j) s += x.vector[i] * a_[i * dy + j] * y.vector[j];
    }
    return (own ? config_.own_bonus : 0.0) + config_.generation_temperature * s;
  }

  // P(. | prompt) over the whole response pool.
  Vector generation_row(std::size_t prompt) const {
    Vector logits(responses_.size());
    for (std::size_t r = 0; r < responses_.size(); ++r) {
      logits[r] = generation_logit(prompts_[prompt], prompt, r);
    }
    return detail::normalize_log_weights(logits);
  }

  GenerationModel generation_model() const {
    GenerationModel gm;
    for (std::size_t p = 0; p < prompts_.size(); ++p) {
      const Vector row = generation_row(p);
      for (std::size_t r = 0; r < responses_.size(); ++r) {
        gm.set(prompts_[p].id, responses_[r].id, row[r]);
      }
    }
    return gm;
  }

  PromptFeatures random_prompt(std::string id, std::mt19937_64& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    PromptFeatures p;
    p.id = std::move(id);
    p.vector.resize(static_cast<std::size_t>(config_.d_x));
    for (double& v : p.vector) v = normal(rng);
    return p;
  }

  ResponseFeatures random_response(std::string id, std::mt19937_64& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> len(config_.length_min, config_.length_max);
    ResponseFeatures r;
    r.id = std::move(id);
    r.vector.resize(static_cast<std::size_t>(config_.d_y));
    for (double& v : r.vector) v = normal(rng);
    r.length = len(rng);
    return r;
  }

 private:
  WorldConfig config_;
  Vector m_;
  Vector a_;
  Vector u_;
  std::vector<PromptFeatures> prompts_;
  Vector weights_;
  std::vector<ResponseFeatures> responses_;
  std::vector<std::vector<std::size_t>> support_;
};

inline Group length_group(const ResponseFeatures& chosen,
                          const ResponseFeatures& rejected) {
  return chosen.length > rejected.length ? Group::ChosenLonger : Group::ChosenShorter;
}

inline PreferenceSample make_sample(std::string id, const PromptFeatures& x,
                                    const ResponseFeatures& chosen,
                                    const ResponseFeatures& rejected, Group group,
                                    int quota = 0) {
  return {std::move(id), x, chosen, rejected, group, quota};
}

// Base dataset: prompt ~ P(X), two distinct responses from the prompt's
// support drawn with P(y | x), label ~ Bernoulli(sigmoid(oracle gap)).
inline PreferenceDataset gen_base_dataset(const World& w) {
  const auto& c = w.config();
  PreferenceDataset ds;
  ds.prompt_pool = w.prompts();
  ds.prompt_weights = w.prompt_weights();
  ds.generation_model = w.generation_model();
  std::mt19937_64 rng(mix_seed(c.seed, "samples"));
  std::discrete_distribution<std::size_t> pick_prompt(ds.prompt_weights.begin(),
                                                      ds.prompt_weights.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int n = 0; n < c.n_samples; ++n) {
    const std::size_t p = pick_prompt(rng);
    const auto& x = w.prompts()[p];
    const auto& sup = w.support(p);
    Vector probs;
    for (std::size_t r : sup) probs.push_back(ds.generation_model->at(x.id, w.responses()[r].id));
    std::discrete_distribution<std::size_t> pick_resp(probs.begin(), probs.end());
    const std::size_t a = pick_resp(rng);
    std::size_t b = pick_resp(rng);
    while (b == a) b = pick_resp(rng);
    const auto& y1 = w.responses()[sup[a]];
    const auto& y2 = w.responses()[sup[b]];
    bool first_wins = unit(rng) < sigmoid(w.oracle_gap(x, y1, y2));
    if (unit(rng) < c.label_noise) first_wins = !first_wins;
    const auto& chosen = first_wins ? y1 : y2;
    const auto& rejected = first_wins ? y2 : y1;
    ds.samples.push_back(make_sample(padded_id('s', static_cast<std::size_t>(n)), x,
                                     chosen, rejected, length_group(chosen, rejected)));
  }
  return ds;
}

inline PreferenceDataset gen_base_dataset(const WorldConfig& config) {
  return gen_base_dataset(World(config));
}

// Keeps every chosen-longer sample and a seeded subset of chosen-shorter ones
// so that chosen-longer makes up `fraction` of the result. Order is kept.
inline PreferenceDataset make_length_biased(const PreferenceDataset& base,
                                            double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ConfigError("chosen_longer_fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> longer;
  std::vector<std::size_t> shorter;
  for (std::size_t i = 0; i < base.size(); ++i) {
    (base.samples[i].chosen.length > base.samples[i].rejected.length ? longer : shorter)
        .push_back(i);
  }
  if (longer.empty() || shorter.empty()) {
    throw PreconditionError("length-biased split needs both length groups");
  }
  const auto want = static_cast<std::size_t>(
      std::lround(static_cast<double>(longer.size()) * (1.0 - fraction) / fraction));
  if (want > shorter.size()) {
    throw PreconditionError("need " + std::to_string(want) +
                            " chosen-shorter samples, base has " +
                            std::to_string(shorter.size()));
  }
  if (want == 0) throw PreconditionError("fraction leaves no chosen-shorter sample");
  std::mt19937_64 rng(mix_seed(seed, "length_biased"));
  std::shuffle(shorter.begin(), shorter.end(), rng);
  shorter.resize(want);
  std::vector<bool> keep(base.size(), false);
  for (std::size_t i : longer) keep[i] = true;
  for (std::size_t i : shorter) keep[i] = true;
  PreferenceDataset out;
  out.prompt_pool = base.prompt_pool;
  out.prompt_weights = base.prompt_weights;
  out.generation_model = base.generation_model;
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (keep[i]) {
      auto s = base.samples[i];
      s.group = length_group(s.chosen, s.rejected);
      out.samples.push_back(std::move(s));
    }
  }
  return out;
}

inline std::string twin_prompt_id(const std::string& id, int directive) {
  return id + (directive < 0 ? "~short" : "~long");
}

// Adds a twin (x-bar, y_l, y_w) for a seeded `fraction` of the samples.
// x-bar copies x and asks for the shortest response when the original chosen
// one is longer, the longest otherwise. Twin prompts join the pool with the
// weight of their source prompt before renormalization.
inline PreferenceDataset make_adversarial(const PreferenceDataset& base,
                                          double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ConfigError("transform_fraction must lie in [0, 1]");
  }
  PreferenceDataset out;
  out.prompt_pool = base.prompt_pool;
  out.prompt_weights = base.prompt_weights;
  out.generation_model = base.generation_model;
  if (fraction == 0.0) {
    out.samples = base.samples;
    return out;
  }
  const auto n = static_cast<std::size_t>(
      std::lround(fraction * static_cast<double>(base.size())));
  std::vector<std::size_t> order(base.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(mix_seed(seed, "adversarial"));
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(n);
  std::sort(order.begin(), order.end());
  auto index = base.prompt_index();
  for (const auto& s : base.samples) {
    auto o = s;
    o.group = Group::Original;
    out.samples.push_back(std::move(o));
  }
  for (std::size_t i : order) {
    const auto& s = base.samples[i];
    const int directive = s.chosen.length > s.rejected.length ? -1 : 1;
    PromptFeatures twin = s.prompt;
    twin.directive = directive;
    twin.id = twin_prompt_id(s.prompt.id, directive);
    if (!index.count(twin.id)) {
      index.emplace(twin.id, out.prompt_pool.size());
      out.prompt_pool.push_back(twin);
      out.prompt_weights.push_back(base.prompt_weights[index.at(s.prompt.id)]);
      if (out.generation_model && out.generation_model->has_prompt(s.prompt.id)) {
        out.generation_model->copy_row(s.prompt.id, twin.id);
      }
    }
    out.samples.push_back(
        make_sample(s.id + "~adv", twin, s.rejected, s.chosen, Group::Adversarial));
  }
  double total = 0.0;
  for (double w : out.prompt_weights) total += w;
  for (double& w : out.prompt_weights) w /= total;
  return out;
}

// Original-distribution pairs (directive 0) re-combined with a different seen
// prompt and labelled by the sign of the oracle gap.
inline PreferenceDataset heldout_recombined(const World& w, std::size_t n,
                                            std::uint64_t seed) {
  PreferenceDataset ds;
  ds.prompt_pool = w.prompts();
  ds.prompt_weights = w.prompt_weights();
  std::mt19937_64 rng(mix_seed(seed, "heldout_recombined"));
  std::uniform_int_distribution<std::size_t> pick_prompt(0, w.prompts().size() - 1);
  std::uniform_int_distribution<std::size_t> pick_resp(
      0, static_cast<std::size_t>(w.config().support) - 1);
  while (ds.samples.size() < n) {
    const std::size_t owner = pick_prompt(rng);
    std::size_t host = pick_prompt(rng);
    while (host == owner) host = pick_prompt(rng);
    const std::size_t a = pick_resp(rng);
    std::size_t b = pick_resp(rng);
    while (b == a) b = pick_resp(rng);
    const auto& x = w.prompts()[host];
    const auto& y1 = w.responses()[w.support(owner)[a]];
    const auto& y2 = w.responses()[w.support(owner)[b]];
    const double g = w.oracle_gap(x, y1, y2);
    if (g == 0.0) continue;
    const auto& chosen = g > 0.0 ? y1 : y2;
    const auto& rejected = g > 0.0 ? y2 : y1;
    ds.samples.push_back(make_sample(padded_id('h', ds.samples.size()), x, chosen,
                                     rejected, length_group(chosen, rejected)));
  }
  return ds;
}

// Fresh prompts and fresh responses from the same distributions.
inline PreferenceDataset heldout_fresh(const World& w, std::size_t n,
                                       std::uint64_t seed) {
  PreferenceDataset ds;
  std::mt19937_64 rng(mix_seed(seed, "heldout_fresh"));
  while (ds.samples.size() < n) {
    const std::size_t k = ds.samples.size();
    const auto x = w.random_prompt(padded_id('f', k), rng);
    const auto y1 = w.random_response(padded_id('g', 2 * k), rng);
    const auto y2 = w.random_response(padded_id('g', 2 * k + 1), rng);
    const double g = w.oracle_gap(x, y1, y2);
    if (g == 0.0) continue;
    ds.prompt_pool.push_back(x);
    const auto& chosen = g > 0.0 ? y1 : y2;
    const auto& rejected = g > 0.0 ? y2 : y1;
    ds.samples.push_back(make_sample(padded_id('h', k), x, chosen, rejected,
                                     length_group(chosen, rejected)));
  }
  ds.prompt_weights.assign(ds.prompt_pool.size(),
                           1.0 / static_cast<double>(ds.prompt_pool.size()));
  return ds;
}

// Fixed reward r(x, y) = r1(x, y) * |y| / c where r1 is 1.0, 0.5 or 0.1 as the
// oracle prefers y, is indifferent, or prefers the other response of the
// pair under x, plus clamped Gaussian noise. |y| / c is the prompt-free part.
class MultiplicativeScorer {
 public:
  MultiplicativeScorer(std::shared_ptr<const World> world, double mean_length,
                       double noise_std = 0.1, double noise_clamp = 0.5,
                       double tie_margin = 0.25, std::uint64_t seed = 0)
      : world_(std::move(world)),
        c_(mean_length),
        noise_std_(noise_std),
        noise_clamp_(noise_clamp),
        tie_margin_(tie_margin),
        seed_(seed) {
    if (!(c_ > 0.0)) throw ConfigError("mean response length must be positive");
  }

  static constexpr std::array<double, 3> kLevels = {1.0, 0.5, 0.1};

  double r1_level(const PromptFeatures& x, const ResponseFeatures& y,
                  const ResponseFeatures& other) const {
    const double g = world_->oracle_gap(x, y, other);
    if (g > tie_margin_) return kLevels[0];
    if (g < -tie_margin_) return kLevels[2];
    return kLevels[1];
  }

  double reward(const PromptFeatures& x, const ResponseFeatures& y,
                const ResponseFeatures& other) const {
    double noise = 0.0;
    if (noise_std_ > 0.0) {
      std::mt19937_64 rng(mix_seed(seed_, x.id + "|" + y.id + "|" + other.id));
      std::normal_distribution<double> normal(0.0, noise_std_);
      noise = std::clamp(normal(rng), -noise_clamp_, noise_clamp_);
    }
    return (r1_level(x, y, other) + noise) * y.length / c_;
  }

  double gap(const PromptFeatures& x, const ResponseFeatures& y1,
             const ResponseFeatures& y2) const {
    return reward(x, y1, y2) - reward(x, y2, y1);
  }

  double gap_bound() const {
    const double top = (kLevels[0] + noise_clamp_) * world_->config().length_max / c_;
    const double bottom =
        std::min(0.0, kLevels[2] - noise_clamp_) * world_->config().length_max / c_;
    return top - bottom;
  }

 private:
  std::shared_ptr<const World> world_;
  double c_;
  double noise_std_;
  double noise_clamp_;
  double tie_margin_;
  std::uint64_t seed_;
};

static_assert(PairGapModel<MultiplicativeScorer>);

inline double mean_response_length(const PreferenceDataset& ds) {
  double total = 0.0;
  for (const auto& s : ds.samples) total += s.chosen.length + s.rejected.length;
  return total / (2.0 * static_cast<double>(ds.size()));
}

struct MultiplicativeWorld {
  std::shared_ptr<const World> world;
  PreferenceDataset dataset;
  MultiplicativeScorer scorer;
};

inline MultiplicativeWorld make_multiplicative_gt(const WorldConfig& config,
                                                  double noise_std = 0.1) {
  auto world = std::make_shared<const World>(config);
  auto ds = gen_base_dataset(*world);
  const double c = mean_response_length(ds);
  MultiplicativeScorer scorer(world, c, noise_std, 0.5, 0.25,
                              mix_seed(config.seed, "multiplicative"));
  return {std::move(world), std::move(ds), std::move(scorer)};
}

// Small fully enumerable dataset for the information checks: n_prompts
// prompts, n_responses responses, a random positive P(y | x) and one sample
// per distinct response pair (up to n_pairs pairs).
inline PreferenceDataset gen_enumerable_dataset(int n_prompts, int n_responses,
                                                int n_pairs, int d_x, int d_y,
                                                std::uint64_t seed) {
  if (n_prompts < 1 || n_responses < 2 || n_pairs < 1) {
    throw ConfigError("enumerable dataset needs prompts, two responses, one pair");
  }
  std::mt19937_64 rng(mix_seed(seed, "enumerable"));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> len(1, 50);
  PreferenceDataset ds;
  Vector logw;
  for (int p = 0; p < n_prompts; ++p) {
    PromptFeatures x;
    x.id = padded_id('x', static_cast<std::size_t>(p), 2);
    x.vector.resize(static_cast<std::size_t>(d_x));
    for (double& v : x.vector) v = normal(rng);
    ds.prompt_pool.push_back(std::move(x));
    logw.push_back(normal(rng));
  }
  ds.prompt_weights = detail::normalize_log_weights(logw);
  std::vector<ResponseFeatures> ys;
  for (int r = 0; r < n_responses; ++r) {
    ResponseFeatures y;
    y.id = padded_id('y', static_cast<std::size_t>(r), 2);
    y.vector.resize(static_cast<std::size_t>(d_y));
    for (double& v : y.vector) v = normal(rng);
    y.length = len(rng);
    ys.push_back(std::move(y));
  }
  GenerationModel gm;
  for (const auto& x : ds.prompt_pool) {
    Vector logits(ys.size());
    for (double& l : logits) l = 1.5 * normal(rng);
    const Vector row = detail::normalize_log_weights(logits);
    for (std::size_t r = 0; r < ys.size(); ++r) gm.set(x.id, ys[r].id, row[r]);
  }
  ds.generation_model = std::move(gm);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < ys.size(); ++a) {
    for (std::size_t b = a + 1; b < ys.size(); ++b) pairs.emplace_back(a, b);
  }
  std::shuffle(pairs.begin(), pairs.end(), rng);
  if (pairs.size() > static_cast<std::size_t>(n_pairs)) pairs.resize(n_pairs);
  std::uniform_int_distribution<std::size_t> pick(0, ds.prompt_pool.size() - 1);
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    auto [a, b] = pairs[j];
    if (normal(rng) < 0.0) std::swap(a, b);
    ds.samples.push_back(make_sample(padded_id('s', j, 2), ds.prompt_pool[pick(rng)],
                                     ys[a], ys[b], length_group(ys[a], ys[b])));
  }
  return ds;
}

}  // namespace pfr

#endif  // PFR_SYNTH_HPP_
