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


#include "komei/model.hpp"

#include <algorithm>
#include <random>
#include <unordered_set>

#include "binio.hpp"
#include "komei/error.hpp"
#include "komei/util.hpp"

namespace komei {

std::string_view to_string(FusionMode m) noexcept {
  switch (m) {
    case FusionMode::text_only:
      return "text_only";
    case FusionMode::evidence_only:
      return "evidence_only";
    case FusionMode::concat:
      return "concat";
    case FusionMode::stack:
      return "stack";
  }
  return "?";
}

FusionMode fusion_mode(const TrainConfig& cfg) {
  if (!cfg.use_text) return FusionMode::evidence_only;
  if (!cfg.use_image && !cfg.use_speech) return FusionMode::text_only;
  return cfg.ca ? FusionMode::stack : FusionMode::concat;
}

// ---- evidence ----------------------------------------------------------------------------

EvidenceStore EvidenceStore::resolve(std::span<const MaskedSample> samples,
                                     const EvidenceTables& tables, const TrainConfig& cfg) {
  if (tables.images && cfg.use_image && tables.images->dim() != cfg.d_v) {
    throw ConfigError("image table dim " + std::to_string(tables.images->dim()) +
                      " does not match d_v = " + std::to_string(cfg.d_v));
  }
  if (tables.speech && cfg.use_speech && tables.speech->dim() != cfg.d_s) {
    throw ConfigError("speech table dim " + std::to_string(tables.speech->dim()) +
                      " does not match d_s = " + std::to_string(cfg.d_s));
  }
  EvidenceStore store;
  std::vector<std::string> missing;
  auto fetch = [&](const std::string& key, const EmbeddingTable* table, Modality modality,
                   std::size_t dim) -> std::optional<Tensor2> {
    if (table) {
      if (const Tensor2* found = table->find(key)) return *found;
    }
    if (!cfg.toy_fallback) {
      missing.push_back(std::string(to_string(modality)) + ":" + key);
      return std::nullopt;
    }
    ++store.fallbacks_;
    return toy_evidence(key, modality, dim, cfg.toy_seed);
  };
  for (const auto& s : samples) {
    if (cfg.use_image && !store.image_.count(s.media_key)) {
      if (auto t = fetch(s.media_key, tables.images, Modality::image, cfg.d_v)) {
        store.image_.emplace(s.media_key, std::move(*t));
      }
    }
    if (cfg.use_speech && !store.speech_.count(s.media_key)) {
      if (auto t = fetch(s.media_key, tables.speech, Modality::speech, cfg.d_s)) {
        store.speech_.emplace(s.media_key, pool_frames(*t, cfg.speech_pool));
      }
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size(); ++i) list += (i ? ", " : "") + missing[i];
    throw DataError("no evidence for media keys (toy fallback disabled): " + list);
  }
  return store;
}

const Tensor2& EvidenceStore::image(const std::string& key) const {
  auto it = image_.find(key);
  if (it == image_.end()) throw DataError("no image evidence resolved for '" + key + "'");
  return it->second;
}

const Tensor2& EvidenceStore::speech(const std::string& key) const {
  auto it = speech_.find(key);
  if (it == speech_.end()) throw DataError("no speech evidence resolved for '" + key + "'");
  return it->second;
}

// ---- construction ------------------------------------------------------------------------

namespace {

FusionLayout layout_for(const TrainConfig& cfg, FusionMode mode) {
  FusionLayout l;
  l.d_g = cfg.d_g;
  l.image = cfg.use_image;
  l.speech = cfg.use_speech;
  l.share_an = cfg.share_an;
  if (mode == FusionMode::concat) {
    l.ca = l.gu = l.sa = false;
    l.concat_blocks = 3;
  } else {
    l.ca = cfg.ca;
    l.gu = cfg.gu;
    l.sa = cfg.sa;
    l.concat_blocks = 2;
  }
  return l;
}

bool has_prefix(const std::string& s, std::string_view p) { return s.rfind(p, 0) == 0; }

}  // namespace

Model Model::create(const TrainConfig& cfg, std::vector<std::string> categories,
                    TokenVocabulary vocab) {
  cfg.validate();
  if (categories.empty()) throw ConfigError("model needs at least one category");
  Model m;
  m.cfg_ = cfg;
  m.mode_ = fusion_mode(cfg);
  m.categories_ = std::move(categories);
  m.vocab_ = std::move(vocab);
  std::mt19937_64 rng(splitmix64(cfg.seed));
  if (cfg.use_text) m.text_ = TextEncoderParams::create(m.vocab_.size(), cfg.text_dim(), cfg.d_g, rng);
  if (cfg.use_image) m.proj_image_ = ProjectionParams::create("proj.image", cfg.d_v, cfg.d_g, rng);
  if (cfg.use_speech) m.proj_speech_ = ProjectionParams::create("proj.speech", cfg.d_s, cfg.d_g, rng);
  if (m.mode_ == FusionMode::concat || m.mode_ == FusionMode::stack) {
    m.fusion_ = FusionParams::create(layout_for(cfg, m.mode_), rng);
  }
  m.cls_ = ClassifierParams::create(m.categories_.size(), cfg.d_g, rng);
  return m;
}

std::vector<ParamPtr> Model::parameters() const {
  std::vector<ParamPtr> out;
  if (text_) out.insert(out.end(), {text_->embedding, text_->w1, text_->b1, text_->w2, text_->b2});
  if (proj_image_) out.insert(out.end(), {proj_image_->w, proj_image_->b});
  if (proj_speech_) out.insert(out.end(), {proj_speech_->w, proj_speech_->b});
  if (fusion_) {
    const auto f = fusion_->parameters();
    out.insert(out.end(), f.begin(), f.end());
  }
  out.insert(out.end(), {cls_.h, cls_.w, cls_.b});
  return out;
}

ParamAudit Model::audit() const {
  ParamAudit a;
  for (const auto& p : parameters()) {
    const std::size_t n = p->value.size();
    a.total += n;
    if (has_prefix(p->name, "text.")) {
      a.text += n;
    } else if (has_prefix(p->name, "proj.")) {
      a.projection += n;
    } else if (has_prefix(p->name, "ca.")) {
      a.ca += n;
    } else if (has_prefix(p->name, "gu.") || has_prefix(p->name, "an_gu")) {
      a.gu += n;
    } else if (has_prefix(p->name, "sa.") || has_prefix(p->name, "an_sa")) {
      a.sa += n;
    } else if (has_prefix(p->name, "fuse.")) {
      a.fuse += n;
    } else {
      a.classifier += n;
    }
  }
  return a;
}

std::vector<Tensor2> Model::snapshot() const {
  std::vector<Tensor2> out;
  for (const auto& p : parameters()) out.push_back(p->value);
  return out;
}

void Model::restore(const std::vector<Tensor2>& values) {
  const auto params = parameters();
  if (values.size() != params.size()) throw DimensionError("restore: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!values[i].same_shape(params[i]->value)) {
      throw DimensionError("restore: shape mismatch for " + params[i]->name);
    }
    params[i]->value = values[i];
  }
}

// ---- forward -----------------------------------------------------------------------------

Batch Model::make_batch(std::span<const MaskedSample> samples, std::span<const std::size_t> order,
                        const EvidenceStore& evidence) const {
  Batch b;
  bool all_labeled = true;
  std::vector<Tensor2> images, speech;
  std::size_t image_rows = 0, speech_rows = 0;
  for (std::size_t idx : order) {
    if (idx >= samples.size()) throw DimensionError("make_batch: sample index out of range");
    const MaskedSample& s = samples[idx];
    if (s.tokens.empty()) throw DataError("sample '" + s.id + "' has no tokens");
    b.token_ids.push_back(vocab_.encode(s.tokens));
    b.keys.push_back(s.media_key);
    if (s.label) {
      if (*s.label >= categories_.size()) {
        throw DataError("sample '" + s.id + "' label " + std::to_string(*s.label) +
                        " is outside the " + std::to_string(categories_.size()) + " categories");
      }
      b.labels.push_back(*s.label);
    } else {
      all_labeled = false;
    }
    if (cfg_.use_image) {
      images.push_back(evidence.image(s.media_key));
      b.image_segs.push_back({image_rows, image_rows + images.back().rows()});
      image_rows += images.back().rows();
    }
    if (cfg_.use_speech) {
      speech.push_back(evidence.speech(s.media_key));
      b.speech_segs.push_back({speech_rows, speech_rows + speech.back().rows()});
      speech_rows += speech.back().rows();
    }
  }
  if (!all_labeled) b.labels.clear();
  if (cfg_.use_image) b.image = vstack(images);
  if (cfg_.use_speech) b.speech = vstack(speech);
  return b;
}

ForwardResult Model::forward(Tape& tape, const Batch& batch, bool with_alignment) const {
  if (batch.size() == 0) throw DataError("empty batch");
  const double eps = cfg_.an_eps;

  std::optional<Var> text;
  if (text_) text = encode_text(tape, batch.token_ids, *text_);

  struct Stream {
    Var seq;     // projected evidence rows
    Var pooled;  // one row per sample
    const std::vector<Segment>* segs;
  };
  auto stream = [&](const Tensor2& rows, const std::vector<Segment>& segs,
                    const ProjectionParams& proj) {
    const Var seq = project_evidence(tape.constant(rows), proj);
    return Stream{seq, segment_mean(seq, segs), &segs};
  };
  std::optional<Stream> img, sph;
  if (proj_image_) img = stream(batch.image, batch.image_segs, *proj_image_);
  if (proj_speech_) sph = stream(batch.speech, batch.speech_segs, *proj_speech_);

  ForwardResult out;
  if (with_alignment && cfg_.cfa && text && fusion_) {
    const Tensor2 match = match_matrix(batch.keys);
    const AlignmentConfig align = cfg_.alignment();
    if (img) out.l_ti = contrastive_align_loss(*text, img->pooled, match, align);
    if (sph) out.l_ts = contrastive_align_loss(*text, sph->pooled, match, align);
  }

  switch (mode_) {
    case FusionMode::text_only:
      out.fused = *text;
      break;
    case FusionMode::evidence_only:
      out.fused = img ? img->pooled : sph->pooled;
      break;
    case FusionMode::concat: {
      const std::optional<Var> blocks[3] = {
          text, img ? std::optional<Var>(img->pooled) : std::nullopt,
          sph ? std::optional<Var>(sph->pooled) : std::nullopt};
      out.fused = fuse(std::span<const std::optional<Var>>(blocks), *fusion_->w_h, *fusion_->b_h);
      break;
    }
    case FusionMode::stack: {
      const FusionParams& f = *fusion_;
      auto branch = [&](const Stream& s, const AttentionParams& ca,
                        const std::optional<AddNormParams>& an_gu,
                        const std::optional<AttentionParams>& sa,
                        const std::optional<AddNormParams>& an_sa) {
        Var m = cross_modal_attention(*text, s.seq, *s.segs, ca);
        if (f.gate) m = gated_unit(m, *f.gate, *an_gu, eps);
        if (sa) m = self_attend_refine(m, *sa, *an_sa, eps);
        return m;
      };
      std::optional<Var> ti, ts;
      if (img) ti = branch(*img, *f.ca_ti, f.an_gu_ti, f.sa_ti, f.an_sa_ti);
      if (sph) ts = branch(*sph, *f.ca_ts, f.an_gu_ts, f.sa_ts, f.an_sa_ts);
      out.fused = fuse(ti, ts, *f.w_h, *f.b_h);
      break;
    }
  }
  out.logits = class_logits(out.fused, cls_);
  return out;
}

Var Model::loss(Tape& tape, const Batch& batch) const {
  if (batch.labels.size() != batch.size()) throw DataError("training batch contains unlabeled samples");
  const ForwardResult r = forward(tape, batch, true);
  const Var l_p = prediction_loss_from_logits(r.logits, batch.labels);
  return total_loss(l_p, r.l_ti, r.l_ts, cfg_.loss_weights());
}

Tensor2 Model::scores(const Batch& batch) const {
  Tape tape;
  return softmax_rows(forward(tape, batch, false).logits).value();
}

Tensor2 Model::features(const Batch& batch) const {
  Tape tape;
  return forward(tape, batch, false).fused.value();
}

// ---- checkpoint ----------------------------------------------------------------------------

namespace {

constexpr char kCkptMagic[4] = {'K', 'O', 'M', 'C'};
constexpr std::uint32_t kCkptVersion = 1;

void put_string16(detail::ByteWriter& w, const std::string& s, const char* what) {
  if (s.size() > 0xffff) throw FormatError(std::string("checkpoint: ") + what + " too long");
  w.u16(static_cast<std::uint16_t>(s.size()));
  w.bytes(s);
}

}  // namespace

std::vector<std::uint8_t> Model::serialize() const {
  detail::ByteWriter w;
  w.bytes(std::string_view(kCkptMagic, 4));
  w.u32(kCkptVersion);
  w.u64(cfg_.hash());
  const std::string text = cfg_.model_text();
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.bytes(text);
  w.u32(static_cast<std::uint32_t>(categories_.size()));
  for (const auto& c : categories_) put_string16(w, c, "category name");
  w.u32(static_cast<std::uint32_t>(vocab_.size()));
  for (const auto& t : vocab_.tokens()) put_string16(w, t, "token");
  const auto params = parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put_string16(w, p->name, "parameter name");
    w.u32(static_cast<std::uint32_t>(p->value.rows()));
    w.u32(static_cast<std::uint32_t>(p->value.cols()));
    for (double v : p->value.data()) w.f64(v);
  }
  return w.take();
}

Model Model::deserialize(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "checkpoint");
  if (r.bytes(4, "magic") != std::string_view(kCkptMagic, 4)) throw FormatError("checkpoint: bad magic");
  if (const auto v = r.u32("version"); v != kCkptVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(v));
  }
  const std::uint64_t hash = r.u64("config hash");
  const std::string text = r.bytes(r.u32("config length"), "config text");
  TrainConfig cfg;
  try {
    cfg = parse_config_text(text);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: embedded config: ") + e.what());
  }
  if (cfg.hash() != hash) throw FormatError("checkpoint: config hash does not match embedded config");

  std::vector<std::string> categories(r.u32("category count"));
  for (auto& c : categories) c = r.bytes(r.u16("category length"), "category name");
  std::vector<std::string> tokens(r.u32("token count"));
  for (auto& t : tokens) t = r.bytes(r.u16("token length"), "token");

  Model m = create(cfg, std::move(categories), TokenVocabulary(std::move(tokens)));
  const auto params = m.parameters();
  const std::size_t n = r.u32("tensor count");
  if (n != params.size()) {
    throw FormatError("checkpoint: " + std::to_string(n) + " tensors, model expects " +
                      std::to_string(params.size()));
  }
  for (const auto& p : params) {
    const std::string name = r.bytes(r.u16("name length"), "tensor name");
    if (name != p->name) throw FormatError("checkpoint: expected tensor '" + p->name + "', found '" + name + "'");
    const std::size_t rows = r.u32("rows");
    const std::size_t cols = r.u32("cols");
    if (rows != p->value.rows() || cols != p->value.cols()) {
      throw FormatError("checkpoint: tensor '" + name + "' has shape " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", expected " + p->value.shape_string());
    }
    std::vector<double> data(rows * cols);
    for (double& v : data) v = r.f64("tensor data");
    try {
      p->value = Tensor2(rows, cols, std::move(data));
    } catch (const DomainError&) {
      throw FormatError("checkpoint: tensor '" + name + "' holds non-finite values");
    }
  }
  if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes after last tensor");
  return m;
}

void Model::save(const std::filesystem::path& path) const { detail::write_file_bytes(path, serialize()); }

Model Model::load(const std::filesystem::path& path) {
  return deserialize(detail::read_file_bytes(path));
}

}  // namespace komei
