// Copyright 2026 The komei Authors
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


#pragma once

// Training configuration and its flat key=value text form:
//
//   # comment
//   d_g = 32
//   share_an = true
//
// Unknown keys and malformed values are rejected with the line number.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "komei/encoders.hpp"
#include "komei/fusion.hpp"
#include "komei/prediction.hpp"

namespace komei {

struct TrainConfig {
  // dimensions
  std::size_t d_g = 64;
  std::size_t d_v = 64;
  std::size_t d_s = 64;
  std::size_t d_t = 0;  // 0: same as d_g

  // optimization
  std::size_t batch_size = 128;
  double lr = 5e-5;
  std::size_t warmup_steps = 1000;
  double weight_decay = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t epochs = 20;
  std::size_t patience = 5;  // 0 disables early stopping
  std::uint64_t seed = 0;

  // objective
  double tau = 0.07;
  AlignmentConfig::Reduction align_reduction = AlignmentConfig::Reduction::mean;
  double alpha = 1.0;
  double beta = 0.1;
  double gamma = 0.1;

  // architecture
  bool share_an = true;
  bool use_text = true;
  bool use_image = true;
  bool use_speech = true;
  bool cfa = true;
  bool ca = true;
  bool gu = true;
  bool sa = true;
  SpeechPool speech_pool = SpeechPool::mean;
  double an_eps = 1e-5;

  // data
  bool toy_fallback = true;
  std::uint64_t toy_seed = 0;
  double split_ratio = 0.8;
  std::string corpus;
  std::string test;
  std::string vocab;
  std::string images;
  std::string speech;

  /// Throws ConfigError for inconsistent settings (stack order sa => gu => ca,
  /// text off with both evidence streams, non-positive sizes, ...).
  void validate() const;

  std::size_t text_dim() const { return d_t == 0 ? d_g : d_t; }
  LossWeights loss_weights() const { return {alpha, beta, gamma}; }
  AlignmentConfig alignment() const { return {tau, align_reduction}; }

  /// Sets one field from its text form. Throws ConfigError.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;
  static const std::vector<std::string>& keys();

  /// Every field as key=value lines, in keys() order.
  std::string to_text() const;
  /// Same, without the data path fields; this is what the hash covers.
  std::string model_text() const;
  std::uint64_t hash() const;
};

/// Applies key=value lines on top of base.
TrainConfig parse_config_text(std::string_view text, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});

}  // namespace komei
