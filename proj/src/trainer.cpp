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


#include "komei/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>

#include "komei/error.hpp"
#include "komei/util.hpp"

namespace komei {

namespace {

std::string fmt(double v, const char* spec = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

double top1_accuracy(const Model& model, std::span<const MaskedSample> samples,
                     const EvidenceStore& evidence) {
  std::size_t hits = 0;
  const std::size_t bs = model.config().batch_size;
  for (std::size_t first = 0; first < samples.size(); first += bs) {
    const std::size_t count = std::min(bs, samples.size() - first);
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), first);
    const Batch batch = model.make_batch(samples, order, evidence);
    const Tensor2 scores = model.scores(batch);
    for (std::size_t r = 0; r < count; ++r) {
      if (top_k_hit(scores.row_span(r), *samples[first + r].label, 1)) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

void require_labels(std::span<const MaskedSample> samples, const char* what) {
  for (const auto& s : samples) {
    if (!s.label) throw DataError(std::string(what) + " sample '" + s.id + "' has no label");
  }
}

}  // namespace

std::vector<std::string> default_categories(std::span<const MaskedSample> samples) {
  std::size_t n = 0;
  for (const auto& s : samples) {
    if (s.label) n = std::max(n, *s.label + 1);
  }
  if (n == 0) throw DataError("no labeled samples to infer categories from");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::to_string(i));
  return out;
}

TrainResult train(const TrainConfig& cfg, const TrainData& data, const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.train.empty()) throw DataError("training set is empty");
  require_labels(data.train, "training");
  require_labels(data.val, "validation");

  TrainResult result{Model::create(cfg, data.categories, TokenVocabulary::build(data.train)), {}, {}, {}, 0, 0};
  Model& model = result.model;
  const EvidenceStore train_ev = EvidenceStore::resolve(data.train, data.tables, cfg);
  const EvidenceStore val_ev = EvidenceStore::resolve(data.val, data.tables, cfg);

  const auto params = model.parameters();
  const std::size_t n = data.train.size();
  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  AdamWConfig opt;
  opt.lr = cfg.lr;
  opt.beta1 = cfg.adam_beta1;
  opt.beta2 = cfg.adam_beta2;
  opt.eps = cfg.adam_eps;
  opt.weight_decay = cfg.weight_decay;
  opt.warmup_steps = cfg.warmup_steps;
  opt.total_steps = cfg.epochs * steps_per_epoch;
  OptimState state(params, opt);

  std::mt19937_64 shuffle_rng(splitmix64(cfg.seed ^ 0x7368756666ULL));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  double best_acc = -1.0;
  std::size_t since_best = 0;
  std::vector<Tensor2> best_values;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_j = 0.0;
    for (std::size_t first = 0; first < n; first += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n - first);
      const Batch batch =
          model.make_batch(data.train, std::span<const std::size_t>(order).subspan(first, count), train_ev);
      Tape tape;
      const ForwardResult r = model.forward(tape, batch, true);
      const Var l_p = prediction_loss_from_logits(r.logits, batch.labels);
      const Var j = total_loss(l_p, r.l_ti, r.l_ts, cfg.loss_weights());
      LossRecord rec;
      rec.step = state.t + 1;
      rec.l_p = l_p.value()(0, 0);
      if (r.l_ti) rec.l_ti = r.l_ti->value()(0, 0);
      if (r.l_ts) rec.l_ts = r.l_ts->value()(0, 0);
      rec.j = j.value()(0, 0);
      if (!std::isfinite(rec.j)) throw DomainError("training diverged: non-finite loss at step " + std::to_string(rec.step));
      zero_grads(params);
      tape.backward(j);
      adamw_step(params, state);
      epoch_j += rec.j;
      result.curve.push_back(rec);
    }
    result.epoch_loss.push_back(epoch_j / static_cast<double>(steps_per_epoch));
    result.epochs_run = epoch;

    std::optional<double> acc;
    if (!data.val.empty()) {
      acc = top1_accuracy(model, data.val, val_ev);
      result.val_acc1.push_back(*acc);
      if (*acc > best_acc) {
        best_acc = *acc;
        best_values = model.snapshot();
        result.best_epoch = epoch;
        since_best = 0;
      } else {
        ++since_best;
      }
    } else {
      result.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(epoch, result.epoch_loss.back(), acc);
    if (cfg.patience > 0 && since_best >= cfg.patience) break;
  }
  if (!best_values.empty()) model.restore(best_values);
  return result;
}

// ---- evaluation ------------------------------------------------------------------------------

EvalReport report_from_scores(const Tensor2& scores, std::span<const std::size_t> gold,
                              std::uint64_t config_hash) {
  if (gold.size() != scores.rows()) {
    throw DimensionError("report_from_scores: " + std::to_string(gold.size()) + " labels for " +
                         scores.shape_string() + " scores");
  }
  if (gold.empty()) throw DataError("evaluation set is empty");
  EvalReport rep;
  rep.n = gold.size();
  rep.config_hash = config_hash;
  const std::size_t n_cat = scores.cols();
  rep.category_hits.assign(n_cat, {});
  rep.category_count.assign(n_cat, 0);
  for (std::size_t r = 0; r < gold.size(); ++r) {
    if (gold[r] >= n_cat) throw DataError("gold category " + std::to_string(gold[r]) + " out of range");
    ++rep.category_count[gold[r]];
    for (std::size_t k = 1; k <= 3; ++k) {
      if (top_k_hit(scores.row_span(r), gold[r], std::min(k, n_cat))) {
        ++rep.hits[k - 1];
        ++rep.category_hits[gold[r]][k - 1];
      }
    }
  }
  for (std::size_t k = 0; k < 3; ++k) {
    rep.acc[k] = static_cast<double>(rep.hits[k]) / static_cast<double>(rep.n);
  }
  return rep;
}

ScoredSamples score_samples(const Model& model, std::span<const MaskedSample> samples,
                            const EvidenceTables& tables) {
  const EvidenceStore ev = EvidenceStore::resolve(samples, tables, model.config());
  ScoredSamples out;
  std::vector<Tensor2> score_parts, feature_parts;
  const std::size_t bs = model.config().batch_size;
  for (std::size_t first = 0; first < samples.size(); first += bs) {
    const std::size_t count = std::min(bs, samples.size() - first);
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), first);
    const Batch batch = model.make_batch(samples, order, ev);
    Tape tape;
    const ForwardResult r = model.forward(tape, batch, false);
    score_parts.push_back(softmax_rows(r.logits).value());
    feature_parts.push_back(r.fused.value());
  }
  for (const auto& s : samples) {
    out.ids.push_back(s.id);
    out.gold.push_back(s.label);
  }
  if (!samples.empty()) {
    out.scores = vstack(score_parts);
    out.features = vstack(feature_parts);
  }
  return out;
}

EvalReport evaluate(const Model& model, std::span<const MaskedSample> samples,
                    const EvidenceTables& tables) {
  std::vector<MaskedSample> labeled;
  for (const auto& s : samples) {
    if (s.label) labeled.push_back(s);
  }
  if (labeled.empty()) throw DataError("evaluation set has no labeled samples");
  const ScoredSamples scored = score_samples(model, labeled, tables);
  std::vector<std::size_t> gold;
  for (const auto& g : scored.gold) gold.push_back(*g);
  return report_from_scores(scored.scores, gold, model.config().hash());
}

void check_config_hash(const Model& model, const TrainConfig& runtime) {
  if (model.config().hash() != runtime.hash()) {
    throw ConfigError("checkpoint config hash " + hex64(model.config().hash()) +
                      " does not match runtime config hash " + hex64(runtime.hash()));
  }
}

void write_predictions(std::ostream& out, std::span<const std::string> ids,
                       std::span<const std::optional<std::size_t>> gold, const Tensor2& scores) {
  if (ids.size() != scores.rows() || gold.size() != scores.rows()) {
    throw DimensionError("write_predictions: row count mismatch");
  }
  out << "id,gold,top1,p1,top2,p2,top3,p3\n";
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    out << ids[r] << ',';
    if (gold[r]) out << *gold[r];
    const auto ranked = ranked_categories(scores.row_span(r));
    for (std::size_t k = 0; k < 3; ++k) {
      out << ',';
      if (k < ranked.size()) out << ranked[k] << ',' << fmt(scores(r, ranked[k]));
      else out << ',';
    }
    out << '\n';
  }
}

void write_features(std::ostream& out, std::span<const std::string> ids,
                    std::span<const std::optional<std::size_t>> gold, const Tensor2& features) {
  if (ids.size() != features.rows() || gold.size() != features.rows()) {
    throw DimensionError("write_features: row count mismatch");
  }
  out << "id,label";
  for (std::size_t c = 0; c < features.cols(); ++c) out << ",h" << c;
  out << '\n';
  for (std::size_t r = 0; r < features.rows(); ++r) {
    out << ids[r] << ',';
    if (gold[r]) out << *gold[r];
    for (std::size_t c = 0; c < features.cols(); ++c) out << ',' << fmt(features(r, c));
    out << '\n';
  }
}

void write_loss_curve(std::ostream& out, std::span<const LossRecord> curve) {
  out << "step,L_P,L_TI,L_TS,J\n";
  for (const auto& r : curve) {
    out << r.step << ',' << fmt(r.l_p) << ',';
    if (r.l_ti) out << fmt(*r.l_ti);
    out << ',';
    if (r.l_ts) out << fmt(*r.l_ts);
    out << ',' << fmt(r.j) << '\n';
  }
}

// ---- ablations -------------------------------------------------------------------------------

TrainConfig modality_config(const TrainConfig& base, bool text, bool image, bool speech) {
  TrainConfig c = base;
  c.use_text = text;
  c.use_image = image;
  c.use_speech = speech;
  return c;
}

std::vector<std::pair<std::string, TrainConfig>> modality_grid(const TrainConfig& base,
                                                               bool has_images, bool has_speech) {
  struct Combo {
    const char* name;
    bool t, v, a;
  };
  static constexpr Combo combos[] = {{"T", true, false, false},   {"V", false, true, false},
                                     {"A", false, false, true},   {"T+V", true, true, false},
                                     {"T+A", true, false, true},  {"T+V+A", true, true, true}};
  std::vector<std::pair<std::string, TrainConfig>> out;
  for (const auto& c : combos) {
    if ((c.v && !has_images) || (c.a && !has_speech)) {
      warn(std::string("ablation row ") + c.name + " skipped: no " + (c.v && !has_images ? "image" : "speech") +
           " evidence for this domain");
      continue;
    }
    out.emplace_back(c.name, modality_config(base, c.t, c.v, c.a));
  }
  return out;
}

std::vector<std::pair<std::string, TrainConfig>> component_grid(const TrainConfig& base,
                                                                bool has_images, bool has_speech) {
  TrainConfig full = modality_config(base, true, has_images, has_speech);
  if (!has_images && !has_speech) throw ConfigError("component ablation needs at least one evidence stream");
  auto with = [&](bool cfa, bool ca, bool gu, bool sa) {
    TrainConfig c = full;
    c.cfa = cfa;
    c.ca = ca;
    c.gu = gu;
    c.sa = sa;
    return c;
  };
  TrainConfig text_only = with(false, false, false, false);
  text_only.use_image = text_only.use_speech = false;
  TrainConfig not_shared = with(true, true, true, true);
  not_shared.share_an = false;
  TrainConfig shared = with(true, true, true, true);
  shared.share_an = true;
  return {{"T", text_only},
          {"Delta", with(false, false, false, false)},
          {"Delta+C1", with(true, false, false, false)},
          {"Delta+C1+C2", with(true, true, false, false)},
          {"Delta+C1+C2+G", with(true, true, true, false)},
          {"Delta+C1+C2+G+S", with(true, true, true, true)},
          {"AN_NotShare", not_shared},
          {"AN_Share", shared}};
}

ParamAudit audit_config(const TrainConfig& cfg, std::size_t n_categories, std::size_t vocab_size) {
  std::vector<std::string> cats(n_categories);
  for (std::size_t i = 0; i < n_categories; ++i) cats[i] = std::to_string(i);
  std::vector<std::string> tokens{std::string(TokenVocabulary::kUnkToken), std::string(kMaskToken)};
  for (std::size_t i = tokens.size(); i < vocab_size; ++i) tokens.push_back("w" + std::to_string(i));
  return Model::create(cfg, std::move(cats), TokenVocabulary(std::move(tokens))).audit();
}

std::vector<AblationRow> run_grid(const std::vector<std::pair<std::string, TrainConfig>>& grid,
                                  const AblationData& data) {
  std::vector<AblationRow> rows;
  for (const auto& [name, cfg] : grid) {
    TrainResult r = train(cfg, data.train);
    AblationRow row{name, cfg, r.model.audit(), evaluate(r.model, data.test, data.train.tables)};
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<AblationRow> ablate_modalities(const TrainConfig& base, const AblationData& data) {
  return run_grid(modality_grid(base, data.has_images, data.has_speech), data);
}

std::vector<AblationRow> ablate_components(const TrainConfig& base, const AblationData& data) {
  return run_grid(component_grid(base, data.has_images, data.has_speech), data);
}

void write_report_csv(std::ostream& out, std::span<const AblationRow> rows) {
  out << "row,acc1,acc2,acc3,n,params,ca_params,gu_params,sa_params,config_hash\n";
  for (const auto& r : rows) {
    out << r.name << ',' << fmt(r.report.acc[0]) << ',' << fmt(r.report.acc[1]) << ','
        << fmt(r.report.acc[2]) << ',' << r.report.n << ',' << r.audit.total << ',' << r.audit.ca << ','
        << r.audit.gu << ',' << r.audit.sa << ',' << hex64(r.config.hash()) << '\n';
  }
}

void write_report_table(std::ostream& out, std::span<const AblationRow> rows) {
  std::size_t width = 3;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  auto pad = [&](const std::string& s) { return s + std::string(width - s.size(), ' '); };
  out << pad("row") << "   Acc@1   Acc@2   Acc@3      n    params\n";
  for (const auto& r : rows) {
    char line[128];
    std::snprintf(line, sizeof line, "  %6.4f  %6.4f  %6.4f  %5zu  %8zu\n", r.report.acc[0], r.report.acc[1],
                  r.report.acc[2], r.report.n, r.audit.total);
    out << pad(r.name) << line;
  }
}

// ---- verification ------------------------------------------------------------------------------

GradCheckResult model_grad_check(const TrainConfig& base, std::size_t batch, std::size_t n_categories,
                                 double h) {
  if (batch == 0 || n_categories == 0) throw ConfigError("gradcheck needs a non-empty batch and categories");
  TrainConfig cfg = base;
  cfg.toy_fallback = true;
  static constexpr const char* words[] = {"sold", "some", "today", "the", "guy", "near", "park", "bought"};
  std::vector<MaskedSample> samples;
  for (std::size_t i = 0; i < batch; ++i) {
    MaskedSample s;
    s.id = "gc-" + std::to_string(i);
    s.tokens = {words[i % 8], words[(3 * i + 1) % 8], std::string(kMaskToken), words[(5 * i + 2) % 8]};
    s.label = i % n_categories;
    // keys repeat every other sample so the alignment terms see shared positives
    s.media_key = "key" + std::to_string((i / 2) % n_categories);
    samples.push_back(std::move(s));
  }
  std::vector<std::string> cats;
  for (std::size_t i = 0; i < n_categories; ++i) cats.push_back("c" + std::to_string(i));
  const Model model = Model::create(cfg, std::move(cats), TokenVocabulary::build(samples));
  const EvidenceStore ev = EvidenceStore::resolve(samples, {}, cfg);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const Batch b = model.make_batch(samples, order, ev);
  const auto params = model.parameters();
  return grad_check([&](Tape& tape) { return model.loss(tape, b); }, params, h);
}

}  // namespace komei
