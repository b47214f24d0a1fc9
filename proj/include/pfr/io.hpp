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

// Line-oriented JSON storage for datasets and models.
//
// A dataset directory holds
//   samples.jsonl     one PreferenceSample per line
//   prompts.jsonl     one prompt-pool entry per line, with its weight P(x)
//   generation.jsonl  (optional) one row of P(y | x) per prompt
//
// samples.jsonl fields: id, prompt_id, prompt_vec, directive, chosen_id,
// chosen_vec, chosen_len, rejected_id, rejected_vec, rejected_len, group,
// quota.

#ifndef PFR_IO_HPP_
#define PFR_IO_HPP_

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pfr/core.hpp"
#include "pfr/dataset.hpp"
#include "pfr/error.hpp"

namespace pfr {

using ordered_json = nlohmann::ordered_json;

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

template <class F>
void for_each_line(const std::filesystem::path& path, F&& fn) {
  auto in = open_in(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
      fn(j);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " +
                    e.what());
    }
  }
}

}  // namespace detail

inline std::string read_file(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path,
                       const std::string& content) {
  auto out = detail::open_out(path);
  out << content;
  if (!out) throw IoError("write failed: " + path.string());
}

// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(std::string_view bytes,
                           std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

inline ordered_json sample_to_json(const PreferenceSample& s) {
  ordered_json j;
  j["id"] = s.id;
  j["prompt_id"] = s.prompt.id;
  j["prompt_vec"] = s.prompt.vector;
  j["directive"] = s.prompt.directive;
  j["chosen_id"] = s.chosen.id;
  j["chosen_vec"] = s.chosen.vector;
  j["chosen_len"] = s.chosen.length;
  j["rejected_id"] = s.rejected.id;
  j["rejected_vec"] = s.rejected.vector;
  j["rejected_len"] = s.rejected.length;
  j["group"] = std::string(to_string(s.group));
  j["quota"] = s.reinsertion_quota;
  return j;
}

inline PreferenceSample sample_from_json(const ordered_json& j) {
  PreferenceSample s;
  s.id = j.at("id").get<std::string>();
  s.prompt.id = j.at("prompt_id").get<std::string>();
  s.prompt.vector = j.at("prompt_vec").get<Vector>();
  s.prompt.directive = j.at("directive").get<int>();
  s.chosen.id = j.at("chosen_id").get<std::string>();
  s.chosen.vector = j.at("chosen_vec").get<Vector>();
  s.chosen.length = j.at("chosen_len").get<int>();
  s.rejected.id = j.at("rejected_id").get<std::string>();
  s.rejected.vector = j.at("rejected_vec").get<Vector>();
  s.rejected.length = j.at("rejected_len").get<int>();
  s.group = group_from_string(j.at("group").get<std::string>());
  s.reinsertion_quota = j.at("quota").get<int>();
  return s;
}

inline void write_dataset(const std::filesystem::path& dir,
                          const PreferenceDataset& ds) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  {
    auto out = detail::open_out(dir / "samples.jsonl");
    for (const auto& s : ds.samples) out << sample_to_json(s).dump() << '\n';
  }
  {
    auto out = detail::open_out(dir / "prompts.jsonl");
    for (std::size_t i = 0; i < ds.prompt_pool.size(); ++i) {
      const auto& p = ds.prompt_pool[i];
      ordered_json j;
      j["prompt_id"] = p.id;
      j["prompt_vec"] = p.vector;
      j["directive"] = p.directive;
      j["weight"] = ds.prompt_weights[i];
      out << j.dump() << '\n';
    }
  }
  const auto gen_path = dir / "generation.jsonl";
  if (ds.generation_model) {
    auto out = detail::open_out(gen_path);
    for (const auto& p : ds.prompt_pool) {
      auto it = ds.generation_model->rows().find(p.id);
      if (it == ds.generation_model->rows().end()) continue;
      std::vector<std::pair<std::string, double>> row(it->second.begin(),
                                                      it->second.end());
      std::sort(row.begin(), row.end());
      ordered_json j;
      j["prompt_id"] = p.id;
      std::vector<std::string> ids;
      std::vector<double> probs;
      for (auto& [rid, prob] : row) {
        ids.push_back(rid);
        probs.push_back(prob);
      }
      j["response_ids"] = ids;
      j["probs"] = probs;
      out << j.dump() << '\n';
    }
  } else {
    std::filesystem::remove(gen_path, ec);
  }
}

inline PreferenceDataset read_dataset(const std::filesystem::path& dir) {
  PreferenceDataset ds;
  detail::for_each_line(dir / "samples.jsonl", [&](const ordered_json& j) {
    ds.samples.push_back(sample_from_json(j));
  });
  detail::for_each_line(dir / "prompts.jsonl", [&](const ordered_json& j) {
    PromptFeatures p;
    p.id = j.at("prompt_id").get<std::string>();
    p.vector = j.at("prompt_vec").get<Vector>();
    p.directive = j.at("directive").get<int>();
    ds.prompt_pool.push_back(std::move(p));
    ds.prompt_weights.push_back(j.at("weight").get<double>());
  });
  const auto gen_path = dir / "generation.jsonl";
  if (std::filesystem::exists(gen_path)) {
    GenerationModel gm;
    detail::for_each_line(gen_path, [&](const ordered_json& j) {
      const auto pid = j.at("prompt_id").get<std::string>();
      const auto ids = j.at("response_ids").get<std::vector<std::string>>();
      const auto probs = j.at("probs").get<std::vector<double>>();
      if (ids.size() != probs.size()) {
        throw IoError("generation row for " + pid + " is ragged");
      }
      for (std::size_t i = 0; i < ids.size(); ++i) gm.set(pid, ids[i], probs[i]);
    });
    ds.generation_model = std::move(gm);
  }
  validate_dataset(ds);
  return ds;
}

inline ordered_json model_to_json(const RewardFunction& m) {
  ordered_json j;
  j["prompt_dim"] = m.layout().prompt_dim;
  j["response_dim"] = m.layout().response_dim;
  j["length_center"] = m.layout().length_center;
  j["length_scale"] = m.layout().length_scale;
  j["r_min"] = m.bounds().lo;
  j["r_max"] = m.bounds().hi;
  j["parameters"] = m.parameters();
  return j;
}

inline RewardFunction model_from_json(const ordered_json& j) {
  try {
    FeatureLayout layout;
    layout.prompt_dim = j.at("prompt_dim").get<std::size_t>();
    layout.response_dim = j.at("response_dim").get<std::size_t>();
    layout.length_center = j.at("length_center").get<double>();
    layout.length_scale = j.at("length_scale").get<double>();
    RewardBounds bounds{j.at("r_min").get<double>(), j.at("r_max").get<double>()};
    return RewardFunction(layout, bounds, j.at("parameters").get<Vector>());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed model file: ") + e.what());
  }
}

inline void write_model(const std::filesystem::path& path,
                        const RewardFunction& m) {
  write_file(path, model_to_json(m).dump(2) + "\n");
}

inline RewardFunction read_model(const std::filesystem::path& path) {
  const auto text = read_file(path);
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace pfr

#endif  // PFR_IO_HPP_
