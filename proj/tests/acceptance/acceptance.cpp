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


// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "komei/corpus.hpp"
#include "komei/encoders.hpp"
#include "komei/fusion.hpp"
#include "komei/model.hpp"
#include "komei/optim.hpp"
#include "komei/prediction.hpp"
#include "komei/synthetic.hpp"
#include "komei/trainer.hpp"
#include "komei/util.hpp"
#include "test_support.hpp"

using namespace komei;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- 1 -----------------------------------------------------------------------------------

Outcome gradient_fidelity() {
  Outcome o;
  TrainConfig cfg;
  cfg.d_g = cfg.d_v = cfg.d_s = 8;
  const auto t0 = Clock::now();
  const GradCheckResult r = model_grad_check(cfg, 4, 3, 1e-5);
  const double dt = seconds_since(t0);
  o.require(r.max_rel_error < 1e-4, "max relative error " + fmt("%.3g", r.max_rel_error) + " at " +
                                        r.worst_param);
  o.require(dt < 10.0, "runtime " + fmt("%.2f", dt) + " s");
  o.detail = o.pass ? std::to_string(r.coordinates) + " coordinates, max rel error " +
                          fmt("%.2e", r.max_rel_error) + ", " + fmt("%.2f", dt) + " s"
                    : o.detail;
  return o;
}

// ---- 2 -----------------------------------------------------------------------------------

Outcome golden_values() {
  Outcome o;
  constexpr double tol = 1e-9;
  auto near = [&](double got, double want, const std::string& what) {
    o.require(std::abs(got - want) <= tol, what + " = " + fmt("%.12g", got) + " (want " + fmt("%.12g", want) + ")");
  };
  auto align = [](const Tensor2& t, const Tensor2& e, std::vector<std::string> keys, double tau) {
    Tape tape;
    return contrastive_align_loss(tape.constant(t), tape.constant(e), match_matrix(keys), {.tau = tau})
        .value()(0, 0);
  };
  const double e = std::exp(1.0);
  near(align(Tensor2::identity(2), Tensor2::identity(2), {"a", "b"}, 1.0), -std::log(e / (e + 1.0)),
       "contrastive B=2");
  const Tensor2 same(4, 3, 0.5);
  near(align(same, same, {"a", "b", "c", "d"}, 0.07), std::log(4.0), "contrastive uniform B=4");
  near(align(Tensor2::row({1, 2}), Tensor2::row({-3, 1}), {"a"}, 0.07), 0.0, "contrastive B=1");

  const std::vector<std::size_t> g0{0};
  near(prediction_loss(Tensor2::row({0.5, 0.5}), g0), std::log(2.0), "L_P two-way");
  for (std::size_t n : {3u, 5u, 12u}) {
    near(prediction_loss(Tensor2(1, n, 1.0 / static_cast<double>(n)), g0), std::log(static_cast<double>(n)),
         "L_P uniform n=" + std::to_string(n));
  }
  ClassifierParams cls;
  cls.h = std::make_shared<Parameter>("h", Tensor2::identity(2));
  cls.w = std::make_shared<Parameter>("w", Tensor2::row({1, 1}));
  cls.b = std::make_shared<Parameter>("b", Tensor2(1, 1));
  const Tensor2 p = predict_scores(Tensor2::row({1, 0}), cls);
  near(p(0, 0), e / (e + 1.0), "classifier p1");
  near(p(0, 1), 1.0 / (e + 1.0), "classifier p2");

  const Tensor2 s = softmax_rows(Tensor2::row({0, std::log(2.0), std::log(3.0)}));
  near(s(0, 0), 1.0 / 6.0, "softmax[0]");
  near(s(0, 1), 2.0 / 6.0, "softmax[1]");
  near(s(0, 2), 3.0 / 6.0, "softmax[2]");
  const Tensor2 u = softmax_rows(Tensor2::row({0, 0, 0}));
  near(u(0, 1), 1.0 / 3.0, "softmax uniform");

  const Tensor2 ln = layer_norm(Tensor2::row({1, -1}), Tensor2::row({1, 1}), Tensor2::row({0, 0}), 1e-12);
  near(ln(0, 0), 1.0, "layer_norm[0]");
  near(ln(0, 1), -1.0, "layer_norm[1]");
  const Tensor2 lc = layer_norm(Tensor2::row({4, 4}), Tensor2::row({1, 1}), Tensor2::row({0.5, -2}), 1e-5);
  near(lc(0, 0), 0.5, "layer_norm constant[0]");
  near(lc(0, 1), -2.0, "layer_norm constant[1]");

  const Tensor2 v = Tensor2::from_rows({{1, 2}, {3, -4}});
  const Tensor2 a1 = attention(Tensor2::row({5, -7}), Tensor2::row({0.3, 0.9}), Tensor2::row({1.5, -2.5}));
  near(a1(0, 0), 1.5, "attention k=1[0]");
  near(a1(0, 1), -2.5, "attention k=1[1]");
  const Tensor2 a2 = attention(Tensor2::row({0.2, 1}), Tensor2::from_rows({{1, 1}, {1, 1}}), v);
  near(a2(0, 0), 2.0, "attention identical keys[0]");
  near(a2(0, 1), -1.0, "attention identical keys[1]");
  const Tensor2 a3 = attention(Tensor2::row({0, 1}), Tensor2::from_rows({{2, 0}, {-1, 0}}), v);
  near(a3(0, 0), 2.0, "attention orthogonal query[0]");
  near(a3(0, 1), -1.0, "attention orthogonal query[1]");

  const Tensor2 lin = linear(Tensor2::row({1, 0}), Tensor2::from_rows({{2, 3}, {4, 5}}), Tensor2::row({1, 1}));
  near(lin(0, 0), 3.0, "linear[0]");
  near(lin(0, 1), 4.0, "linear[1]");
  if (o.pass) o.detail = "all golden values within 1e-9";
  return o;
}

// ---- 3 -----------------------------------------------------------------------------------

Outcome degeneracy() {
  Outcome o;
  Tensor2 gu_scaled_ref;
  auto run_once = [&](Tensor2& ca_out, Tensor2& ca_ref, Tensor2& gu_out, Tensor2& gu_ref) {
    std::mt19937_64 rng(17);
    const std::size_t d = 6;
    const auto ca = AttentionParams::create("ca", d, rng);
    const Tensor2 text = random_normal(4, d, 1.0, rng);
    const Tensor2 ev = random_normal(4, d, 1.0, rng);
    const std::vector<Segment> segs{{0, 1}, {1, 2}, {2, 3}, {3, 4}};
    Tape t;
    ca_out = cross_modal_attention(t.constant(text), t.constant(ev), segs, ca).value();
    ca_ref = matmul(t.constant(ev), t.param(*ca.wv)).value();

    auto gate = GateParams::create(d, rng);
    gate.w_g->value.fill(0.0);
    gate.b_g->value.fill(0.0);
    const auto an = AddNormParams::create("an", d);
    const Tensor2 m = random_normal(4, d, 1.0, rng);
    gu_out = gated_unit(t.constant(m), gate, an, 1e-12).value();
    gu_ref = layer_norm(m, an.gain->value, an.bias->value, 1e-12);
    gu_scaled_ref = layer_norm(scale(t.constant(m), 1.5).value(), an.gain->value, an.bias->value, 1e-12);
  };
  Tensor2 ca1, car1, gu1, gur1, ca2, car2, gu2, gur2;
  run_once(ca1, car1, gu1, gur1);
  run_once(ca2, car2, gu2, gur2);
  o.require(ca1 == car1, "CA over one evidence row differs from the projected value row");
  o.require(gu1 == gu_scaled_ref, "GU with zero gate differs from layer_norm(1.5 M)");
  const double gu_err = komei::testing::max_abs_diff(gu1, gur1);
  o.require(gu_err <= 1e-9, "GU with zero gate differs from layer_norm by " + fmt("%.3g", gu_err));
  o.require(ca1 == ca2 && gu1 == gu2, "outputs differ between runs");
  if (o.pass) o.detail = "CA exact, GU max deviation " + fmt("%.2e", gu_err) + ", bitwise stable";
  return o;
}

// ---- 4 -----------------------------------------------------------------------------------

TrainConfig desk_config(std::uint64_t seed) {
  TrainConfig c;
  c.d_g = c.d_v = c.d_s = 32;
  c.batch_size = 32;
  c.lr = 0.01;
  c.warmup_steps = 10;
  c.seed = seed;
  return c;
}

Outcome overfit() {
  Outcome o;
  SyntheticSpec spec;
  spec.seed = 1;
  const SyntheticData data = generate_synthetic(spec);
  const SyntheticCorpus corpus = build_synthetic_corpus(data, 0.8, spec.seed);
  TrainConfig cfg = desk_config(1);
  cfg.epochs = 500;
  cfg.patience = 5;
  const auto t0 = Clock::now();
  const TrainResult r = train(cfg, {corpus.train, corpus.val, data.vocab.categories, {}});
  const double dt = seconds_since(t0);
  const double best = r.val_acc1.empty() ? 0.0 : *std::max_element(r.val_acc1.begin(), r.val_acc1.end());
  o.require(corpus.train.size() + corpus.val.size() == 200, "corpus has " +
                                                                std::to_string(corpus.train.size() + corpus.val.size()) +
                                                                " samples");
  o.require(best >= 0.95, "best val Acc@1 " + fmt("%.3f", best));
  o.require(dt < 60.0, "runtime " + fmt("%.1f", dt) + " s");
  o.require(r.epoch_loss.back() < r.epoch_loss.front(), "loss did not decrease");
  if (o.pass) {
    o.detail = "val Acc@1 " + fmt("%.3f", best) + " at epoch " + std::to_string(r.best_epoch) + ", " +
               fmt("%.1f", dt) + " s";
  }
  return o;
}

// ---- 5 -----------------------------------------------------------------------------------

double test_acc1(const TrainConfig& cfg, const SyntheticData& data, const SyntheticCorpus& corpus) {
  const EvidenceTables tables{data.images ? &*data.images : nullptr, data.speech ? &*data.speech : nullptr};
  const TrainResult r = train(cfg, {corpus.train, corpus.val, data.vocab.categories, tables});
  return evaluate(r.model, corpus.test, tables).acc[0];
}

Outcome multimodal_gain() {
  Outcome o;
  std::string summary;
  for (Scenario scenario : {Scenario::image_planted, Scenario::speech_planted}) {
    const bool image = scenario == Scenario::image_planted;
    std::string gains;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      SyntheticSpec spec;
      spec.scenario = scenario;
      spec.categories = 4;
      spec.train_sentences = 400;
      spec.seed = seed;
      const SyntheticData data = generate_synthetic(spec);
      const SyntheticCorpus corpus = build_synthetic_corpus(data, 0.8, seed);
      TrainConfig base = desk_config(seed);
      base.epochs = 40;
      base.patience = 10;
      const double t = test_acc1(modality_config(base, true, false, false), data, corpus);
      const double tm = test_acc1(modality_config(base, true, image, !image), data, corpus);
      const double gain = tm - t;
      gains += (gains.empty() ? "" : " ") + fmt("%+.3f", gain);
      o.require(gain >= 0.2, std::string(image ? "T+V" : "T+A") + " seed " + std::to_string(seed) + ": T " +
                                 fmt("%.3f", t) + ", multimodal " + fmt("%.3f", tm));
    }
    summary += std::string(summary.empty() ? "" : "; ") + (image ? "T+V gains " : "T+A gains ") + gains;
  }
  if (o.pass) o.detail = summary;
  return o;
}

// ---- 6 -----------------------------------------------------------------------------------

Outcome component_harness() {
  Outcome o;
  SyntheticSpec spec;
  spec.scenario = Scenario::image_planted;
  spec.categories = 4;
  spec.train_sentences = 120;
  spec.test_sentences = 60;
  spec.dim = 16;
  spec.seed = 7;
  const SyntheticData data = generate_synthetic(spec);
  const SyntheticCorpus corpus = build_synthetic_corpus(data, 0.8, 7);
  TrainConfig base = desk_config(7);
  base.d_g = base.d_v = base.d_s = 16;
  base.epochs = 5;
  const EvidenceTables tables{&*data.images, &*data.speech};
  const AblationData ad{{corpus.train, corpus.val, data.vocab.categories, tables}, corpus.test, true, true};
  const auto rows = ablate_components(base, ad);

  const std::vector<std::string> want{"T", "Delta", "Delta+C1", "Delta+C1+C2", "Delta+C1+C2+G",
                                      "Delta+C1+C2+G+S", "AN_NotShare", "AN_Share"};
  std::vector<std::string> got;
  for (const auto& r : rows) got.push_back(r.name);
  o.require(got == want, "row names differ");
  if (got != want) return o;

  const std::size_t d = base.d_g;
  const ParamAudit& delta = rows[1].audit;
  o.require(delta.ca == 0 && delta.gu == 0 && delta.sa == 0, "Delta has CA/GU/SA parameters");
  o.require(rows[6].audit.total - rows[7].audit.total == 4 * d,
            "share toggle difference " + std::to_string(rows[6].audit.total - rows[7].audit.total));
  o.require(rows[3].audit.ca > 0 && rows[3].audit.gu == 0, "C2 row audit");
  o.require(rows[4].audit.gu > 0 && rows[4].audit.sa == 0, "G row audit");
  o.require(rows[5].audit.sa > 0, "S row audit");
  for (const auto& r : rows) {
    const std::size_t expect = audit_config(r.config, data.vocab.categories.size(),
                                            TokenVocabulary::build(corpus.train).size())
                                   .total;
    o.require(r.audit.total == expect, r.name + " audit disagrees with a fresh model");
    o.require(r.report.n == corpus.test.size(), r.name + " evaluated on " + std::to_string(r.report.n) + " samples");
  }
  std::ostringstream table;
  write_report_table(table, rows);
  std::printf("%s", table.str().c_str());
  if (o.pass) o.detail = "8 rows, share toggle = 4*d_g = " + std::to_string(4 * d) + ", Delta CA/GU/SA = 0";
  return o;
}

// ---- 7 -----------------------------------------------------------------------------------

std::vector<std::string> cells(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

// Brute-force Acc@k from the prediction CSV alone.
std::array<std::size_t, 3> csv_hits(const std::string& csv) {
  std::array<std::size_t, 3> hits{};
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto c = cells(line);
    const std::string& gold = c[1];
    std::size_t listed = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      bool hit = false;
      for (std::size_t j = 0; j <= k; ++j) {
        if (!c[2 + 2 * j].empty()) {
          hit = hit || c[2 + 2 * j] == gold;
          listed = std::max(listed, j + 1);
        }
      }
      // with fewer than k categories every category is listed
      if (listed < k + 1 && c[2 + 2 * k].empty()) hit = true;
      hits[k] += hit;
    }
  }
  return hits;
}

Outcome metric_oracle() {
  Outcome o;
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> level(0, 6);
  std::uniform_int_distribution<std::size_t> pick_n(1, 40), pick_c(2, 8);
  std::size_t mismatches = 0, order_violations = 0, csv_errors = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = pick_n(rng), cats = pick_c(rng);
    Tensor2 s(n, cats);
    std::vector<std::size_t> gold(n);
    std::vector<std::string> ids;
    std::vector<std::optional<std::size_t>> ogold;
    for (std::size_t i = 0; i < n; ++i) {
      // coarse levels force frequent ties
      double total = 0.0;
      for (std::size_t c = 0; c < cats; ++c) total += s(i, c) = 1.0 + level(rng);
      for (std::size_t c = 0; c < cats; ++c) s(i, c) /= total;
      gold[i] = std::uniform_int_distribution<std::size_t>(0, cats - 1)(rng);
      ids.push_back("s" + std::to_string(i));
      ogold.emplace_back(gold[i]);
    }
    const EvalReport rep = report_from_scores(s, gold);
    std::ostringstream csv;
    write_predictions(csv, ids, ogold, s);
    const auto hits = csv_hits(csv.str());
    if (hits != rep.hits) ++mismatches;
    for (std::size_t k = 0; k < 3; ++k) {
      if (rep.acc[k] != static_cast<double>(hits[k]) / static_cast<double>(n)) ++mismatches;
    }
    if (!(rep.acc[0] <= rep.acc[1] && rep.acc[1] <= rep.acc[2])) ++order_violations;

    // The CSV ranking itself against the raw scores: position = strictly
    // greater scores plus equal scores at lower indices.
    std::istringstream in(csv.str());
    std::string line;
    std::getline(in, line);
    for (std::size_t i = 0; std::getline(in, line); ++i) {
      const auto c = cells(line);
      for (std::size_t k = 0; k < std::min<std::size_t>(3, cats); ++k) {
        const std::size_t cat = std::stoul(c[2 + 2 * k]);
        std::size_t ahead = 0;
        for (std::size_t j = 0; j < cats; ++j) {
          if (s(i, j) > s(i, cat) || (s(i, j) == s(i, cat) && j < cat)) ++ahead;
        }
        if (ahead != k || std::stod(c[3 + 2 * k]) != s(i, cat)) ++csv_errors;
      }
    }
  }

  // Same check through evaluate on a trained model.
  SyntheticSpec spec;
  spec.categories = 5;
  spec.train_sentences = 80;
  spec.test_sentences = 60;
  spec.seed = 3;
  const SyntheticData data = generate_synthetic(spec);
  const SyntheticCorpus corpus = build_synthetic_corpus(data, 0.8, 3);
  TrainConfig cfg = desk_config(3);
  cfg.d_g = cfg.d_v = cfg.d_s = 8;
  cfg.epochs = 2;
  const TrainResult r = train(cfg, {corpus.train, corpus.val, data.vocab.categories, {}});
  const EvalReport rep = evaluate(r.model, corpus.test, {});
  const ScoredSamples scored = score_samples(r.model, corpus.test, {});
  std::ostringstream csv;
  write_predictions(csv, scored.ids, scored.gold, scored.scores);
  if (csv_hits(csv.str()) != rep.hits) ++mismatches;

  o.require(mismatches == 0, std::to_string(mismatches) + " Acc@k mismatches");
  o.require(order_violations == 0, std::to_string(order_violations) + " Acc@1<=Acc@2<=Acc@3 violations");
  o.require(csv_errors == 0, std::to_string(csv_errors) + " CSV ranking errors");
  if (o.pass) o.detail = "1000 random matrices plus a trained model match the CSV oracle exactly";
  return o;
}

// ---- 8 -----------------------------------------------------------------------------------

Outcome hygiene() {
  Outcome o;
  komei::testing::TempDir dir;
  SyntheticSpec spec;
  spec.scenario = Scenario::image_planted;
  spec.categories = 4;
  spec.train_sentences = 150;
  spec.test_sentences = 40;
  spec.dim = 8;
  spec.seed = 5;
  const SyntheticData data = generate_synthetic(spec);
  const auto all = build_training_set(data.train_sentences, data.vocab);
  const auto test = build_test_set(data.test_sentences, data.truth, &data.vocab);

  std::size_t bad_masks = 0;
  for (const auto& s : all) bad_masks += mask_count(s) != 1;
  for (const auto& s : test) bad_masks += mask_count(s) != 1;
  o.require(bad_masks == 0, std::to_string(bad_masks) + " samples without exactly one [MASK]");

  const auto parts = split(all, 0.8, 5);
  const auto expect_train = static_cast<std::size_t>(std::ceil(0.8 * static_cast<double>(all.size())));
  o.require(parts.train.size() == expect_train && parts.train.size() + parts.val.size() == all.size(),
            "split sizes " + std::to_string(parts.train.size()) + "/" + std::to_string(parts.val.size()));
  std::vector<std::string> ids_in, ids_out;
  for (const auto& s : all) ids_in.push_back(s.id);
  for (const auto& s : parts.train) ids_out.push_back(s.id);
  for (const auto& s : parts.val) ids_out.push_back(s.id);
  std::sort(ids_in.begin(), ids_in.end());
  std::sort(ids_out.begin(), ids_out.end());
  o.require(ids_in == ids_out && std::adjacent_find(ids_out.begin(), ids_out.end()) == ids_out.end(),
            "split is not a partition");

  auto slurp = [](const std::filesystem::path& p) {
    const auto bytes = std::filesystem::file_size(p);
    std::string s(bytes, '\0');
    std::FILE* f = std::fopen(p.c_str(), "rb");
    const std::size_t got = std::fread(s.data(), 1, bytes, f);
    std::fclose(f);
    s.resize(got);
    return s;
  };
  write_corpus(parts.train, dir / "a.jsonl");
  write_corpus(read_corpus(dir / "a.jsonl"), dir / "b.jsonl");
  o.require(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"), "corpus round trip not byte-identical");

  write_table(*data.images, dir / "a.kome");
  write_table(load_embedding_table(dir / "a.kome"), dir / "b.kome");
  o.require(slurp(dir / "a.kome") == slurp(dir / "b.kome"), "KOME round trip not byte-identical");

  TrainConfig cfg = desk_config(5);
  cfg.d_g = cfg.d_v = cfg.d_s = 8;
  cfg.epochs = 3;
  const EvidenceTables tables{&*data.images, &*data.speech};
  const TrainData td{parts.train, parts.val, data.vocab.categories, tables};
  const TrainResult r1 = train(cfg, td);
  const TrainResult r2 = train(cfg, td);
  r1.model.save(dir / "a.komc");
  Model::load(dir / "a.komc").save(dir / "b.komc");
  r2.model.save(dir / "c.komc");
  o.require(slurp(dir / "a.komc") == slurp(dir / "b.komc"), "checkpoint round trip not byte-identical");
  o.require(slurp(dir / "a.komc") == slurp(dir / "c.komc"), "same-seed checkpoints differ");
  if (o.pass) {
    o.detail = std::to_string(all.size() + test.size()) + " samples, split " + std::to_string(parts.train.size()) +
               "/" + std::to_string(parts.val.size()) + ", round trips and reruns byte-identical";
  }
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {1, "gradient fidelity", gradient_fidelity},
      {2, "golden values", golden_values},
      {3, "degeneracy", degeneracy},
      {4, "overfit", overfit},
      {5, "multimodal gain", multimodal_gain},
      {6, "component ablation harness", component_harness},
      {7, "metric oracle", metric_oracle},
      {8, "pipeline hygiene", hygiene},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += !o.pass;
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
