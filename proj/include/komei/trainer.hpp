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

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "komei/config.hpp"
#include "komei/corpus.hpp"
#include "komei/model.hpp"
#include "komei/optim.hpp"

namespace komei {

struct LossRecord {
  std::size_t step = 0;  // 1-based optimizer step
  double l_p = 0.0;
  std::optional<double> l_ti, l_ts;
  double j = 0.0;
};

struct TrainData {
  std::span<const MaskedSample> train;
  std::span<const MaskedSample> val;  // may be empty: no early stopping
  std::vector<std::string> categories;
  EvidenceTables tables;
};

struct TrainResult {
  Model model;
  std::vector<LossRecord> curve;
  std::vector<double> epoch_loss;  // mean J per epoch
  std::vector<double> val_acc1;    // per epoch, empty without validation data
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;  // 1-based; 0 when no epoch ran
};

/// Called after every epoch with (epoch, mean J, val Acc@1 if any).
using EpochCallback = std::function<void(std::size_t, double, std::optional<double>)>;

/// Seeded per-epoch shuffles, AdamW with warmup and linear decay, early
/// stopping on val Acc@1 with the best epoch's parameters restored.
TrainResult train(const TrainConfig& cfg, const TrainData& data, const EpochCallback& on_epoch = {});

/// Category names "0".."n-1" covering every label in the samples.
std::vector<std::string> default_categories(std::span<const MaskedSample> samples);

// ---- evaluation ----------------------------------------------------------------------------

struct EvalReport {
  std::array<double, 3> acc{};  // Acc@1, Acc@2, Acc@3
  std::array<std::size_t, 3> hits{};
  std::size_t n = 0;
  std::vector<std::array<std::size_t, 3>> category_hits;
  std::vector<std::size_t> category_count;
  std::uint64_t config_hash = 0;
};

/// Acc@k over score rows. k larger than the category count always hits.
EvalReport report_from_scores(const Tensor2& scores, std::span<const std::size_t> gold,
                              std::uint64_t config_hash = 0);

struct ScoredSamples {
  std::vector<std::string> ids;
  std::vector<std::optional<std::size_t>> gold;
  Tensor2 scores;    // probabilities, one row per sample
  Tensor2 features;  // fused H, one row per sample
};

/// Runs inference over every sample in input order.
ScoredSamples score_samples(const Model& model, std::span<const MaskedSample> samples,
                            const EvidenceTables& tables);

/// Scores the labeled samples only. Throws DataError when none are labeled.
EvalReport evaluate(const Model& model, std::span<const MaskedSample> samples,
                    const EvidenceTables& tables);

/// Throws ConfigError when the runtime config would build a different model.
void check_config_hash(const Model& model, const TrainConfig& runtime);

/// id,gold,top1,p1,top2,p2,top3,p3 with category indices; gold is empty for
/// unlabeled samples.
void write_predictions(std::ostream& out, std::span<const std::string> ids,
                       std::span<const std::optional<std::size_t>> gold, const Tensor2& scores);
/// id,label,h0..h{d-1}
void write_features(std::ostream& out, std::span<const std::string> ids,
                    std::span<const std::optional<std::size_t>> gold, const Tensor2& features);
/// step,L_P,L_TI,L_TS,J; absent alignment terms are left empty.
void write_loss_curve(std::ostream& out, std::span<const LossRecord> curve);

// ---- ablations -------------------------------------------------------------------------------

struct AblationData {
  TrainData train;
  std::span<const MaskedSample> test;
  bool has_images = true;
  bool has_speech = true;
};

struct AblationRow {
  std::string name;
  TrainConfig config;
  ParamAudit audit;
  EvalReport report;
};

TrainConfig modality_config(const TrainConfig& base, bool text, bool image, bool speech);

/// Rows T, V, A, T+V, T+A, T+V+A that the available evidence permits.
std::vector<std::pair<std::string, TrainConfig>> modality_grid(const TrainConfig& base,
                                                               bool has_images, bool has_speech);
/// Stack rows T, Delta, Delta+C1, Delta+C1+C2, Delta+C1+C2+G, Delta+C1+C2+G+S
/// followed by AN_NotShare and AN_Share.
std::vector<std::pair<std::string, TrainConfig>> component_grid(const TrainConfig& base,
                                                                bool has_images, bool has_speech);

/// Parameter audit of the model a config builds, without training.
ParamAudit audit_config(const TrainConfig& cfg, std::size_t n_categories, std::size_t vocab_size);

std::vector<AblationRow> run_grid(const std::vector<std::pair<std::string, TrainConfig>>& grid,
                                  const AblationData& data);
std::vector<AblationRow> ablate_modalities(const TrainConfig& base, const AblationData& data);
std::vector<AblationRow> ablate_components(const TrainConfig& base, const AblationData& data);

void write_report_csv(std::ostream& out, std::span<const AblationRow> rows);
void write_report_table(std::ostream& out, std::span<const AblationRow> rows);

// ---- verification ------------------------------------------------------------------------------

/// Gradient check of the full objective J on a toy batch: batch samples over
/// n_categories with repeated media keys so the contrastive terms see
/// in-batch positives beyond the diagonal.
GradCheckResult model_grad_check(const TrainConfig& cfg, std::size_t batch, std::size_t n_categories,
                                 double h);

}  // namespace komei
