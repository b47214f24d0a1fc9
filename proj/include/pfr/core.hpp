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

// Domain types and the bounded reward model.
//
// A reward model scores a (prompt, response) pair with a linear function of
// the features
//
//   s(x, y) = <u, y'> + x'^T V y'
//
// where x' = [x, directive] and y' = [y, length feature]. The score is
// squashed into [r_min, r_max] via r = mid + half * tanh(s), so every reward
// (and every reward gap) is bounded, which is what the prompt-free gap search
// relies on.

#ifndef PFR_CORE_HPP_
#define PFR_CORE_HPP_

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pfr/error.hpp"

namespace pfr {

using Vector = std::vector<double>;

enum class Group { ChosenLonger, ChosenShorter, Original, Adversarial, Plain };

inline std::string_view to_string(Group g) {
  switch (g) {
    case Group::ChosenLonger:
      return "chosen_longer";
    case Group::ChosenShorter:
      return "chosen_shorter";
    case Group::Original:
      return "original";
    case Group::Adversarial:
      return "adversarial";
    case Group::Plain:
      return "plain";
  }
  return "plain";
}

inline Group group_from_string(std::string_view s) {
  if (s == "chosen_longer") return Group::ChosenLonger;
  if (s == "chosen_shorter") return Group::ChosenShorter;
  if (s == "original") return Group::Original;
  if (s == "adversarial") return Group::Adversarial;
  if (s == "plain") return Group::Plain;
  throw ConfigError("unknown group tag: " + std::string(s));
}

struct PromptFeatures {
  std::string id;
  Vector vector;
  // -1 asks for the shortest answer, +1 for the longest, 0 for no directive.
  int directive = 0;
};

struct ResponseFeatures {
  std::string id;
  Vector vector;
  int length = 1;
};

struct PreferenceSample {
  std::string id;
  PromptFeatures prompt;
  ResponseFeatures chosen;
  ResponseFeatures rejected;
  Group group = Group::Plain;
  int reinsertion_quota = 0;
};

// Per-pair split of the total reward gap. prompt_related_gap is always the
// residual total_gap - prompt_free_gap, so the identity is exact.
struct GapDecomposition {
  double total_gap = 0.0;
  double prompt_related_gap = 0.0;
  double prompt_free_gap = 0.0;
  double phi_standard_error = 0.0;  // at the solution, see phi_standard_error()
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
inline double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

// Bradley-Terry probability that the first response wins given its reward gap.
inline double bt_probability(double gap) { return sigmoid(gap); }

struct RewardBounds {
  double lo = -5.0;
  double hi = 5.0;

  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  double half() const { return 0.5 * (hi - lo); }
};

// Shapes of the model inputs. The response length enters the model as one
// extra response coordinate, (length - length_center) / length_scale, and the
// directive flag as one extra prompt coordinate.
struct FeatureLayout {
  std::size_t prompt_dim = 8;
  std::size_t response_dim = 8;
  double length_center = 0.0;
  double length_scale = 1.0;

  std::size_t prompt_width() const { return prompt_dim + 1; }
  std::size_t response_width() const { return response_dim + 1; }
  std::size_t num_parameters() const {
    return response_width() * (1 + prompt_width());
  }
  double length_feature(int length) const {
    return (static_cast<double>(length) - length_center) / length_scale;
  }
};

// Anything that can produce a bounded reward gap for (x, y1, y2). The
// decomposition routines are written against this so that fixed scorers
// (e.g. the multiplicative ground truth) can be decomposed as well.
template <class M>
concept PairGapModel = requires(const M& m, const PromptFeatures& x,
                                const ResponseFeatures& y) {
  { m.gap(x, y, y) } -> std::convertible_to<double>;
  { m.gap_bound() } -> std::convertible_to<double>;
};

class RewardFunction {
 public:
  RewardFunction(FeatureLayout layout, RewardBounds bounds)
      : RewardFunction(layout, bounds, Vector(layout.num_parameters(), 0.0)) {}

  RewardFunction(FeatureLayout layout, RewardBounds bounds, Vector parameters)
      : layout_(layout), bounds_(bounds), theta_(std::move(parameters)) {
    if (!(bounds_.lo < bounds_.hi) || !std::isfinite(bounds_.lo) ||
        !std::isfinite(bounds_.hi)) {
      throw ConfigError("reward bounds must satisfy r_min < r_max");
    }
    if (!(layout_.length_scale > 0.0)) {
      throw ConfigError("length_scale must be positive");
    }
    if (theta_.size() != layout_.num_parameters()) {
      throw ConfigError("parameter vector has " + std::to_string(theta_.size()) +
                        " entries, layout needs " +
                        std::to_string(layout_.num_parameters()));
    }
  }

  const FeatureLayout& layout() const { return layout_; }
  const RewardBounds& bounds() const { return bounds_; }
  const Vector& parameters() const { return theta_; }
  Vector& mutable_parameters() { return theta_; }
  std::size_t num_parameters() const { return theta_.size(); }

  // Pre-squash linear score.
  double score(const PromptFeatures& x, const ResponseFeatures& y) const {
    check_dims(x, y);
    const std::size_t rw = layout_.response_width();
    const std::size_t pw = layout_.prompt_width();
    const double len = layout_.length_feature(y.length);
    auto y_at = [&](std::size_t j) {
      return j < layout_.response_dim ? y.vector[j] : len;
    };
    auto x_at = [&](std::size_t i) {
      return i < layout_.prompt_dim ? x.vector[i]
                                    : static_cast<double>(x.directive);
    };
    double s = 0.0;
    for (std::size_t j = 0; j < rw; ++j) s += theta_[j] * y_at(j);
    for (std::size_t i = 0; i < pw; ++i) {
      const double xi = x_at(i);
      if (xi == 0.0) continue;
      const double* row = theta_.data() + rw * (1 + i);
      double acc = 0.0;
      for (std::size_t j = 0; j < rw; ++j) acc += row[j] * y_at(j);
      s += xi * acc;
    }
    return s;
  }

  double operator()(const PromptFeatures& x, const ResponseFeatures& y) const {
    return squash(score(x, y));
  }

  double squash(double s) const { return bounds_.mid() + bounds_.half() * std::tanh(s); }

  double gap(const PromptFeatures& x, const ResponseFeatures& y1,
             const ResponseFeatures& y2) const {
    return (*this)(x, y1) - (*this)(x, y2);
  }

  double gap_bound() const { return bounds_.width(); }

  // out += scale * d r(x, y) / d theta
  void accumulate_gradient(const PromptFeatures& x, const ResponseFeatures& y,
                           double scale, std::span<double> out) const {
    if (out.size() != theta_.size()) {
      throw ConfigError("gradient buffer size mismatch");
    }
    const double t = std::tanh(score(x, y));
    const double ds = scale * bounds_.half() * (1.0 - t * t);
    if (ds == 0.0) return;
    const std::size_t rw = layout_.response_width();
    const std::size_t pw = layout_.prompt_width();
    const double len = layout_.length_feature(y.length);
    for (std::size_t j = 0; j < rw; ++j) {
      const double yj = j < layout_.response_dim ? y.vector[j] : len;
      out[j] += ds * yj;
      for (std::size_t i = 0; i < pw; ++i) {
        const double xi = i < layout_.prompt_dim
                              ? x.vector[i]
                              : static_cast<double>(x.directive);
        out[rw * (1 + i) + j] += ds * xi * yj;
      }
    }
  }

 private:
  void check_dims(const PromptFeatures& x, const ResponseFeatures& y) const {
    if (x.vector.size() != layout_.prompt_dim) {
      throw ConfigError("prompt '" + x.id + "' has dimension " +
                        std::to_string(x.vector.size()) + ", model expects " +
                        std::to_string(layout_.prompt_dim));
    }
    if (y.vector.size() != layout_.response_dim) {
      throw ConfigError("response '" + y.id + "' has dimension " +
                        std::to_string(y.vector.size()) + ", model expects " +
                        std::to_string(layout_.response_dim));
    }
  }

  FeatureLayout layout_;
  RewardBounds bounds_;
  Vector theta_;
};

static_assert(PairGapModel<RewardFunction>);

inline double reward_eval(const RewardFunction& model, const PromptFeatures& x,
                          const ResponseFeatures& y) {
  return model(x, y);
}

inline double reward_gap(const RewardFunction& model, const PromptFeatures& x,
                         const ResponseFeatures& y1,
                         const ResponseFeatures& y2) {
  return model.gap(x, y1, y2);
}

}  // namespace pfr

#endif  // PFR_CORE_HPP_
