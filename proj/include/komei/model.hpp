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

// Full identification model: text encoder, evidence projections, fusion stack
// and keyword classifier, plus batching and checkpoint files.
//
// Checkpoint layout (little-endian):
//   "KOMC" | u32 version = 1 | u64 config hash | u32 len | config text
//   | u32 n | n x (u16 len | category name)
//   | u32 n | n x (u16 len | token)
//   | u32 n | n x (u16 len | name | u32 rows | u32 cols | rows*cols f64)

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "komei/autograd.hpp"
#include "komei/config.hpp"
#include "komei/corpus.hpp"
#include "komei/encoders.hpp"
#include "komei/fusion.hpp"
#include "komei/prediction.hpp"

namespace komei {

/// How the fused feature H is formed.
enum class FusionMode {
  text_only,      // H = T
  evidence_only,  // H = pooled projected evidence of the single active stream
  concat,         // H = (T ; I ; S) W_H + b_H, no attention stack
  stack,          // H = (M_TI ; M_TS) W_H + b_H
};

std::string_view to_string(FusionMode m) noexcept;
FusionMode fusion_mode(const TrainConfig& cfg);

/// Optional loaded embedding tables. Keys missing from a table fall back to
/// toy features when the config allows it.
struct EvidenceTables {
  const EmbeddingTable* images = nullptr;
  const EmbeddingTable* speech = nullptr;
};

/// Evidence per media key, resolved once per sample set. Speech is stored
/// already pooled according to the config.
class EvidenceStore {
 public:
  /// Throws DataError listing every unresolvable key when toy fallback is off,
  /// ConfigError when a table's dimension disagrees with the config.
  static EvidenceStore resolve(std::span<const MaskedSample> samples, const EvidenceTables& tables,
                               const TrainConfig& cfg);

  const Tensor2& image(const std::string& key) const;
  const Tensor2& speech(const std::string& key) const;
  std::size_t fallback_count() const noexcept { return fallbacks_; }

 private:
  std::unordered_map<std::string, Tensor2> image_;
  std::unordered_map<std::string, Tensor2> speech_;
  std::size_t fallbacks_ = 0;
};

struct Batch {
  std::vector<std::vector<std::size_t>> token_ids;
  std::vector<std::size_t> labels;  // empty when any sample is unlabeled
  std::vector<std::string> keys;
  Tensor2 image;  // stacked evidence rows of every sample
  std::vector<Segment> image_segs;
  Tensor2 speech;
  std::vector<Segment> speech_segs;

  std::size_t size() const noexcept { return keys.size(); }
};

/// Parameter scalars by component group.
struct ParamAudit {
  std::size_t text = 0;
  std::size_t projection = 0;
  std::size_t ca = 0;
  std::size_t gu = 0;  // gate plus its add-norm
  std::size_t sa = 0;  // self-attention plus its add-norm
  std::size_t fuse = 0;
  std::size_t classifier = 0;
  std::size_t total = 0;
};

struct ForwardResult {
  Var fused;   // B x d_g
  Var logits;  // B x n
  std::optional<Var> l_ti, l_ts;
};

/// Copies share parameter storage; use snapshot()/restore() for value copies.
class Model {
 public:
  /// Initializes every parameter from cfg.seed. Throws ConfigError.
  static Model create(const TrainConfig& cfg, std::vector<std::string> categories,
                      TokenVocabulary vocab);

  const TrainConfig& config() const noexcept { return cfg_; }
  FusionMode mode() const noexcept { return mode_; }
  const std::vector<std::string>& categories() const noexcept { return categories_; }
  const TokenVocabulary& vocabulary() const noexcept { return vocab_; }

  Batch make_batch(std::span<const MaskedSample> samples, std::span<const std::size_t> order,
                   const EvidenceStore& evidence) const;

  /// with_alignment adds the contrastive terms (training only).
  ForwardResult forward(Tape& tape, const Batch& batch, bool with_alignment) const;
  /// J = alpha L_P + beta L_TI + gamma L_TS. Requires labels.
  Var loss(Tape& tape, const Batch& batch) const;
  Tensor2 scores(const Batch& batch) const;
  Tensor2 features(const Batch& batch) const;

  /// Distinct parameters in a fixed order.
  std::vector<ParamPtr> parameters() const;
  ParamAudit audit() const;

  std::vector<std::uint8_t> serialize() const;
  static Model deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);

  const std::optional<FusionParams>& fusion() const noexcept { return fusion_; }

  std::vector<Tensor2> snapshot() const;
  void restore(const std::vector<Tensor2>& values);

 private:
  TrainConfig cfg_;
  FusionMode mode_ = FusionMode::stack;
  std::vector<std::string> categories_;
  TokenVocabulary vocab_;
  std::optional<TextEncoderParams> text_;
  std::optional<ProjectionParams> proj_image_, proj_speech_;
  std::optional<FusionParams> fusion_;
  ClassifierParams cls_;
};

}  // namespace komei
