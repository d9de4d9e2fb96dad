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

// Per-sample feature streams. Text goes through a trainable embedding bag and
// two-layer MLP; image and speech evidence is frozen, looked up per surface
// keyword, and mapped into the shared d_g space by ReLU projections.
//
// KOME embedding file layout (little-endian):
//   "KOME" | u32 version = 1 | u8 modality (1 image, 2 speech) | u32 dim
//   | u32 entry_count | entries...
//   entry: u16 key_len | key bytes (UTF-8) | u16 vec_count | vec_count * dim f32

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "komei/autograd.hpp"
#include "komei/corpus.hpp"
#include "komei/tensor.hpp"

namespace komei {

enum class Modality : std::uint8_t { image = 1, speech = 2 };

std::string_view to_string(Modality m) noexcept;

/// Frozen per-keyword evidence. Values are held at 32-bit precision (widened
/// to double) so that in-memory tables and their files agree exactly.
class EmbeddingTable {
 public:
  struct Entry {
    std::string key;
    Tensor2 vectors;  // vec_count x dim

    bool operator==(const Entry&) const = default;
  };

  EmbeddingTable() = default;
  EmbeddingTable(Modality modality, std::size_t dim);

  Modality modality() const noexcept { return modality_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  /// Throws FormatError on duplicate keys, wrong width or an empty entry.
  void add(std::string key, Tensor2 vectors);
  const Tensor2* find(std::string_view key) const;

  bool operator==(const EmbeddingTable& o) const {
    return modality_ == o.modality_ && dim_ == o.dim_ && entries_ == o.entries_;
  }

 private:
  Modality modality_ = Modality::image;
  std::size_t dim_ = 0;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

std::vector<std::uint8_t> serialize_table(const EmbeddingTable& table);
/// Throws FormatError (bad magic/version/modality, duplicate key) or IoError
/// with the byte offset of a truncated record.
EmbeddingTable parse_table(std::span<const std::uint8_t> bytes);
void write_table(const EmbeddingTable& table, const std::filesystem::path& path);
EmbeddingTable load_embedding_table(const std::filesystem::path& path);

/// Deterministic stand-in features: unit vectors from a hash of
/// (surface, modality, index, seed). count = 0 picks the modality default
/// (4 images, 3 speech frames).
std::vector<std::vector<double>> toy_encode(std::string_view surface, Modality modality,
                                            std::size_t dim, std::uint64_t seed,
                                            std::size_t count = 0);
Tensor2 toy_evidence(std::string_view surface, Modality modality, std::size_t dim,
                     std::uint64_t seed, std::size_t count = 0);

// ---- text ----------------------------------------------------------------------

class TokenVocabulary {
 public:
  static constexpr std::size_t kUnk = 0;
  static constexpr std::size_t kMask = 1;
  static constexpr std::string_view kUnkToken = "[UNK]";

  TokenVocabulary();
  /// Full token list; [UNK] and [MASK] must be the first two entries.
  explicit TokenVocabulary(std::vector<std::string> tokens);
  /// Sorted distinct tokens of the samples (specials first).
  static TokenVocabulary build(std::span<const MaskedSample> samples);

  std::size_t id(std::string_view token) const;
  std::vector<std::size_t> encode(std::span<const std::string> tokens) const;
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

struct TextEncoderParams {
  ParamPtr embedding;  // |V| x d_t
  ParamPtr w1, b1;     // d_t -> d_g
  ParamPtr w2, b2;     // d_g -> d_g

  static TextEncoderParams create(std::size_t vocab_size, std::size_t d_t, std::size_t d_g,
                                  std::mt19937_64& rng);
  std::size_t d_g() const { return w2->value.cols(); }
};

/// Batch text features [B x d_g]: mean token embedding through the MLP.
Var encode_text(Tape& tape, const std::vector<std::vector<std::size_t>>& token_ids,
                const TextEncoderParams& params);
/// Single sentence, returns 1 x d_g. Empty token list -> DomainError.
Tensor2 encode_text(std::span<const std::string> tokens, const TokenVocabulary& vocab,
                    const TextEncoderParams& params);

// ---- evidence projections ----------------------------------------------------------

struct ProjectionParams {
  ParamPtr w;  // d_in x d_g
  ParamPtr b;  // 1 x d_g

  static ProjectionParams create(const std::string& name, std::size_t d_in, std::size_t d_g,
                                 std::mt19937_64& rng);
};

enum class SpeechPool { mean, none };

std::string_view to_string(SpeechPool p) noexcept;
SpeechPool parse_speech_pool(std::string_view s);

/// ReLU(x W + b) row by row.
Var project_evidence(Var vectors, const ProjectionParams& proj);
/// Each image vector projected independently; [m_v x d_g].
Tensor2 project_image(const Tensor2& image_vectors, const ProjectionParams& proj);
/// mean: column mean of the frames as one row; none: frames unchanged.
/// Throws EmptyEvidenceError for zero frames.
Tensor2 pool_frames(const Tensor2& frames, SpeechPool pool);
Tensor2 project_speech(const Tensor2& frames, const ProjectionParams& proj, SpeechPool pool);

}  // namespace komei
