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

// Exact information-theoretic bookkeeping for small, fully enumerable
// datasets.
//
// A context is a (prompt, response pair) with joint probability
// P(x, y1, y2). Each preference label variable is a Bernoulli draw whose
// success probability depends on the context:
//
//   Z       sigmoid(dr1(x, y1, y2))
//   Ztilde  sigmoid(dr2(x, y1, y2))
//   W       sigmoid(dr_theta(x, y1, y2))
//   Wtilde  E_{x' ~ P(X | y1, y2)} sigmoid(dr_theta(x', y1, y2)), the same for
//           every prompt of the pair
//
// Bernoulli draws of different variables are independent given the context,
// so Pr[A = a, B = b] = sum_ctx P(ctx) pA^a (1 - pA)^(1-a) pB^b (1 - pB)^(1-b).
// Entropies are in nats.

#ifndef PFR_MI_ORACLE_HPP_
#define PFR_MI_ORACLE_HPP_

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pfr/conditional.hpp"
#include "pfr/core.hpp"
#include "pfr/dataset.hpp"
#include "pfr/decompose.hpp"
#include "pfr/error.hpp"

namespace pfr {

inline constexpr std::size_t kMaxEnumerableContexts = 64;

enum class VariableKind { Z, Ztilde, W, Wtilde };

// Joint P(prompt, pair) over num_prompts x num_pairs contexts, row-major by
// prompt.
class EnumerableDataset {
 public:
  EnumerableDataset(std::size_t num_prompts, std::size_t num_pairs, Vector joint)
      : num_prompts_(num_prompts), num_pairs_(num_pairs), joint_(std::move(joint)) {
    if (num_prompts_ == 0 || num_pairs_ == 0) {
      throw PreconditionError("enumerable dataset needs prompts and pairs");
    }
    if (num_prompts_ * num_pairs_ > kMaxEnumerableContexts) {
      throw UnsupportedError("dataset has " +
                             std::to_string(num_prompts_ * num_pairs_) +
                             " contexts; exact enumeration supports at most " +
                             std::to_string(kMaxEnumerableContexts));
    }
    if (joint_.size() != num_prompts_ * num_pairs_) {
      throw PreconditionError("joint table has the wrong size");
    }
    double total = 0.0;
    for (double p : joint_) {
      if (!(p >= 0.0)) throw PreconditionError("negative context probability");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw PreconditionError("context probabilities sum to " + std::to_string(total));
    }
  }

  std::size_t num_prompts() const { return num_prompts_; }
  std::size_t num_pairs() const { return num_pairs_; }
  std::size_t num_contexts() const { return joint_.size(); }
  double joint(std::size_t prompt, std::size_t pair) const {
    return joint_[prompt * num_pairs_ + pair];
  }
  double pair_prob(std::size_t pair) const {
    double p = 0.0;
    for (std::size_t x = 0; x < num_prompts_; ++x) p += joint(x, pair);
    return p;
  }
  // P(X | pair) as a vector over prompts.
  Vector prompt_posterior(std::size_t pair) const {
    const double pp = pair_prob(pair);
    Vector w(num_prompts_);
    for (std::size_t x = 0; x < num_prompts_; ++x) {
      w[x] = pp > 0.0 ? joint(x, pair) / pp : 1.0 / static_cast<double>(num_prompts_);
    }
    return w;
  }

 private:
  std::size_t num_prompts_;
  std::size_t num_pairs_;
  Vector joint_;
};

// Per-context reward gaps, same layout as EnumerableDataset.
struct GapTable {
  std::size_t num_prompts = 0;
  std::size_t num_pairs = 0;
  Vector values;

  GapTable() = default;
  GapTable(std::size_t prompts, std::size_t pairs, double fill = 0.0)
      : num_prompts(prompts), num_pairs(pairs), values(prompts * pairs, fill) {}

  double& at(std::size_t prompt, std::size_t pair) {
    return values[prompt * num_pairs + pair];
  }
  double at(std::size_t prompt, std::size_t pair) const {
    return values[prompt * num_pairs + pair];
  }
};

struct BernoulliTable {
  Vector context_prob;
  Vector success_prob;
  VariableKind kind = VariableKind::W;
};

struct BernoulliTables {
  BernoulliTable z;
  BernoulliTable z_tilde;
  BernoulliTable w;
  BernoulliTable w_tilde;
};

namespace detail {

inline void check_table(const EnumerableDataset& e, const GapTable& t,
                        const char* name) {
  if (t.num_prompts != e.num_prompts() || t.num_pairs != e.num_pairs() ||
      t.values.size() != e.num_contexts()) {
    throw PreconditionError(std::string(name) + " gap table does not match contexts");
  }
}

inline BernoulliTable sigmoid_table(const EnumerableDataset& e, const GapTable& t,
                                    VariableKind kind) {
  BernoulliTable out;
  out.kind = kind;
  for (std::size_t x = 0; x < e.num_prompts(); ++x) {
    for (std::size_t j = 0; j < e.num_pairs(); ++j) {
      out.context_prob.push_back(e.joint(x, j));
      out.success_prob.push_back(sigmoid(t.at(x, j)));
    }
  }
  return out;
}

inline double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

}  // namespace detail

// The four label variables. dr1 and dr2 are given per context; dr_theta
// drives W and Wtilde.
inline BernoulliTables build_tables(const EnumerableDataset& e, const GapTable& dr1,
                                    const GapTable& dr2, const GapTable& dr_theta) {
  detail::check_table(e, dr1, "dr1");
  detail::check_table(e, dr2, "dr2");
  detail::check_table(e, dr_theta, "dr_theta");
  BernoulliTables t;
  t.z = detail::sigmoid_table(e, dr1, VariableKind::Z);
  t.z_tilde = detail::sigmoid_table(e, dr2, VariableKind::Ztilde);
  t.w = detail::sigmoid_table(e, dr_theta, VariableKind::W);
  Vector pair_mean(e.num_pairs(), 0.0);
  for (std::size_t j = 0; j < e.num_pairs(); ++j) {
    const Vector post = e.prompt_posterior(j);
    for (std::size_t x = 0; x < e.num_prompts(); ++x) {
      pair_mean[j] += post[x] * sigmoid(dr_theta.at(x, j));
    }
  }
  t.w_tilde.kind = VariableKind::Wtilde;
  for (std::size_t x = 0; x < e.num_prompts(); ++x) {
    for (std::size_t j = 0; j < e.num_pairs(); ++j) {
      t.w_tilde.context_prob.push_back(e.joint(x, j));
      t.w_tilde.success_prob.push_back(pair_mean[j]);
    }
  }
  return t;
}

inline double marginal_prob_one(const BernoulliTable& t) {
  double p = 0.0;
  for (std::size_t c = 0; c < t.context_prob.size(); ++c) {
    p += t.context_prob[c] * t.success_prob[c];
  }
  return p;
}

// m[a][b] = Pr[A = a, B = b].
using JointMatrix = std::array<std::array<double, 2>, 2>;

inline JointMatrix joint_prob(const BernoulliTable& a, const BernoulliTable& b) {
  if (a.context_prob != b.context_prob) {
    throw PreconditionError("tables are defined over different contexts");
  }
  JointMatrix m{};
  for (std::size_t c = 0; c < a.context_prob.size(); ++c) {
    const double pc = a.context_prob[c];
    const double pa = a.success_prob[c];
    const double pb = b.success_prob[c];
    m[1][1] += pc * pa * pb;
    m[1][0] += pc * pa * (1.0 - pb);
    m[0][1] += pc * (1.0 - pa) * pb;
    m[0][0] += pc * (1.0 - pa) * (1.0 - pb);
  }
  return m;
}

// Entropy of a Bernoulli(p), nats.
inline double entropy(double p) {
  return -detail::xlogx(p) - detail::xlogx(1.0 - p);
}

inline double entropy(const BernoulliTable& t) {
  // Accumulate both outcomes directly so that tiny tails keep their digits.
  double one = 0.0;
  double zero = 0.0;
  for (std::size_t c = 0; c < t.context_prob.size(); ++c) {
    one += t.context_prob[c] * t.success_prob[c];
    zero += t.context_prob[c] * (1.0 - t.success_prob[c]);
  }
  return -detail::xlogx(one) - detail::xlogx(zero);
}

inline double joint_entropy(const JointMatrix& m) {
  double h = 0.0;
  for (const auto& row : m) {
    for (double p : row) h -= detail::xlogx(p);
  }
  return h;
}

inline double mutual_information(const BernoulliTable& a, const BernoulliTable& b) {
  const JointMatrix m = joint_prob(a, b);
  const double mi = entropy(a) + entropy(b) - joint_entropy(m);
  if (mi < -1e-12) {
    throw InternalError("mutual information " + std::to_string(mi) +
                        " is negative beyond round-off");
  }
  return mi < 0.0 ? 0.0 : mi;
}

// |MI(Ztilde; Wtilde) - MI(Ztilde; W)| without checking that dr2 ignores the
// prompt. Used directly by negative controls.
inline double mi_invariance_gap(const EnumerableDataset& e, const GapTable& dr_theta,
                           const GapTable& dr2) {
  GapTable dr1(e.num_prompts(), e.num_pairs());
  for (std::size_t c = 0; c < dr1.values.size(); ++c) {
    dr1.values[c] = dr_theta.values[c] - dr2.values[c];
  }
  const auto t = build_tables(e, dr1, dr2, dr_theta);
  return std::abs(mutual_information(t.z_tilde, t.w_tilde) -
                  mutual_information(t.z_tilde, t.w));
}

inline bool depends_only_on_pair(const GapTable& g, double tol = 1e-12) {
  for (std::size_t j = 0; j < g.num_pairs; ++j) {
    for (std::size_t x = 1; x < g.num_prompts; ++x) {
      if (std::abs(g.at(x, j) - g.at(0, j)) > tol) return false;
    }
  }
  return true;
}

inline double verify_mi_invariance(const EnumerableDataset& e, const GapTable& dr_theta,
                              const GapTable& dr2_response_only) {
  if (!depends_only_on_pair(dr2_response_only)) {
    throw PreconditionError("prompt-free gap table varies with the prompt");
  }
  return mi_invariance_gap(e, dr_theta, dr2_response_only);
}

struct PhiSplitReport {
  double mi_z_wtilde = 0.0;
  double pr_z_one = 0.0;
  double h_z = 0.0;
  double h_w = 0.0;
  double h_wtilde = 0.0;
  Vector prompt_free_gap;  // per pair
};

// Report for a given per-pair prompt-free gap; dr1 is the residual.
inline PhiSplitReport phi_split_report(const EnumerableDataset& e,
                                      const GapTable& dr_theta,
                                      const Vector& prompt_free_gap) {
  if (prompt_free_gap.size() != e.num_pairs()) {
    throw PreconditionError("need one prompt-free gap per pair");
  }
  GapTable dr1(e.num_prompts(), e.num_pairs());
  GapTable dr2(e.num_prompts(), e.num_pairs());
  for (std::size_t x = 0; x < e.num_prompts(); ++x) {
    for (std::size_t j = 0; j < e.num_pairs(); ++j) {
      dr2.at(x, j) = prompt_free_gap[j];
      dr1.at(x, j) = dr_theta.at(x, j) - prompt_free_gap[j];
    }
  }
  const auto t = build_tables(e, dr1, dr2, dr_theta);
  PhiSplitReport r;
  r.mi_z_wtilde = mutual_information(t.z, t.w_tilde);
  r.pr_z_one = marginal_prob_one(t.z);
  r.h_z = entropy(t.z);
  r.h_w = entropy(t.w);
  r.h_wtilde = entropy(t.w_tilde);
  r.prompt_free_gap = prompt_free_gap;
  return r;
}

// Same report with the prompt-free gap solved by bisection against the
// exact posterior P(X | pair) of the enumeration.
inline PhiSplitReport verify_phi_split(const EnumerableDataset& e,
                                      const GapTable& dr_theta, double gap_bound,
                                      const SearchConfig& config = {}) {
  detail::check_table(e, dr_theta, "dr_theta");
  Vector d(e.num_pairs());
  for (std::size_t j = 0; j < e.num_pairs(); ++j) {
    Vector gaps(e.num_prompts());
    for (std::size_t x = 0; x < e.num_prompts(); ++x) gaps[x] = dr_theta.at(x, j);
    d[j] = solve_prompt_free_gap(gaps, e.prompt_posterior(j), gap_bound, config);
  }
  return phi_split_report(e, dr_theta, d);
}

// Enumeration of a dataset with a generation model: every pool prompt times
// every distinct (chosen, rejected) pair, weighted by P(x) P(y1|x) P(y2|x).
struct EnumeratedPairs {
  EnumerableDataset enumeration;
  std::vector<std::pair<ResponseFeatures, ResponseFeatures>> pairs;
  std::vector<std::size_t> sample_pair;  // pair index of each sample
};

inline EnumeratedPairs enumerate_dataset(const PreferenceDataset& ds) {
  if (!ds.generation_model) {
    throw UnsupportedError("exact enumeration needs a generation model");
  }
  std::vector<std::pair<ResponseFeatures, ResponseFeatures>> pairs;
  std::vector<std::size_t> sample_pair;
  std::unordered_map<std::string, std::size_t> seen;
  for (const auto& s : ds.samples) {
    const std::string key = s.chosen.id + "\x1f" + s.rejected.id;
    auto [it, inserted] = seen.emplace(key, pairs.size());
    if (inserted) pairs.emplace_back(s.chosen, s.rejected);
    sample_pair.push_back(it->second);
  }
  const std::size_t nx = ds.prompt_pool.size();
  if (nx * pairs.size() > kMaxEnumerableContexts) {
    throw UnsupportedError("dataset is too large to enumerate exactly");
  }
  Vector joint(nx * pairs.size());
  double total = 0.0;
  for (std::size_t x = 0; x < nx; ++x) {
    for (std::size_t j = 0; j < pairs.size(); ++j) {
      const double p = ds.prompt_weights[x] *
                       self_generated_prob(ds, ds.prompt_pool[x], pairs[j].first,
                                           pairs[j].second);
      joint[x * pairs.size() + j] = p;
      total += p;
    }
  }
  for (double& p : joint) p /= total;
  return {EnumerableDataset(nx, pairs.size(), std::move(joint)), std::move(pairs),
          std::move(sample_pair)};
}

template <PairGapModel M>
GapTable gap_table(const M& model, const PreferenceDataset& ds,
                   const EnumeratedPairs& en) {
  GapTable t(ds.prompt_pool.size(), en.pairs.size());
  for (std::size_t x = 0; x < ds.prompt_pool.size(); ++x) {
    for (std::size_t j = 0; j < en.pairs.size(); ++j) {
      t.at(x, j) = model.gap(ds.prompt_pool[x], en.pairs[j].first, en.pairs[j].second);
    }
  }
  return t;
}

// End-to-end check on a dataset: prompt-free gaps come from the production
// path (exact Bayes weighting + decompose_pair), the information quantities
// from the enumeration.
template <PairGapModel M>
PhiSplitReport verify_phi_split(const PreferenceDataset& ds, const M& model,
                               const SearchConfig& config = {}) {
  const auto en = enumerate_dataset(ds);
  const GapTable dr_theta = gap_table(model, ds, en);
  Vector d(en.pairs.size(), 0.0);
  std::vector<bool> done(en.pairs.size(), false);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const std::size_t j = en.sample_pair[i];
    if (done[j]) continue;
    const auto& s = ds.samples[i];
    const auto w = exact_bayes_weights(ds, s.chosen, s.rejected);
    d[j] = decompose_pair(model, ds.prompt_pool, s, w, config).prompt_free_gap;
    done[j] = true;
  }
  return phi_split_report(en.enumeration, dr_theta, d);
}

// Ill-formed split dr1 = +saturation everywhere (dr2 the residual). Z becomes
// almost surely 1 and carries no information.
struct IllFormedReport {
  double h_z = 0.0;
  double mi_z_wtilde = 0.0;
  double mi_ztilde_wtilde = 0.0;
  double mi_ztilde_w = 0.0;
};

inline IllFormedReport ill_formed_split(const EnumerableDataset& e,
                                        const GapTable& dr_theta,
                                        double saturation = 30.0) {
  GapTable dr1(e.num_prompts(), e.num_pairs(), saturation);
  GapTable dr2(e.num_prompts(), e.num_pairs());
  for (std::size_t c = 0; c < dr2.values.size(); ++c) {
    dr2.values[c] = dr_theta.values[c] - saturation;
  }
  const auto t = build_tables(e, dr1, dr2, dr_theta);
  return {entropy(t.z), mutual_information(t.z, t.w_tilde),
          mutual_information(t.z_tilde, t.w_tilde),
          mutual_information(t.z_tilde, t.w)};
}

// Two responses sharing the same prompt distribution. A rare prompt set of
// mass `rare_mass` gives y1 a huge reward; everywhere else y2 wins by 1.
// Averaging rewards over prompts ranks y1 first, while the preference-level
// split should favour y2.
struct MarginalizationExample {
  double expected_reward_y1 = 0.0;
  double expected_reward_y2 = 0.0;
  double prompt_free_gap = 0.0;  // for (y1, y2)
};

inline MarginalizationExample marginalization_counterexample(
    double rare_mass = 0.001, double rare_reward = 1e6,
    const SearchConfig& config = {}) {
  // prompt 0 is the rare set, prompt 1 everything else
  const Vector prompt_post = {rare_mass, 1.0 - rare_mass};
  const Vector r_y1 = {rare_reward, 0.0};
  const Vector r_y2 = {0.0, 1.0};
  MarginalizationExample ex;
  Vector gaps(2);
  for (std::size_t x = 0; x < 2; ++x) {
    ex.expected_reward_y1 += prompt_post[x] * r_y1[x];
    ex.expected_reward_y2 += prompt_post[x] * r_y2[x];
    gaps[x] = r_y1[x] - r_y2[x];
  }
  // rewards live in [0, rare_reward]
  ex.prompt_free_gap = solve_prompt_free_gap(gaps, prompt_post, rare_reward, config);
  return ex;
}

}  // namespace pfr

#endif  // PFR_MI_ORACLE_HPP_
