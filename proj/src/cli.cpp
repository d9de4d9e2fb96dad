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


#include "komei/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "komei/config.hpp"
#include "komei/corpus.hpp"
#include "komei/encoders.hpp"
#include "komei/error.hpp"
#include "komei/model.hpp"
#include "komei/synthetic.hpp"
#include "komei/trainer.hpp"
#include "komei/util.hpp"

namespace komei::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

/// Thrown by command bodies for usage problems CLI11 cannot detect.
struct UsageError : Error {
  using Error::Error;
};

/// Thrown when a check command finds a failure after printing its report.
struct CheckFailed {};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  bool json = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "key=value config file")->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "random seed (default: config, then KOMEI_SEED, then 0)");
  sub->add_option("--set", c.sets, "override one config key, KEY=VALUE (repeatable)");
  sub->add_flag("--json", c.json, "print a JSON summary instead of text");
}

void apply_overrides(TrainConfig& cfg, const Common& c) {
  if (!c.config.empty()) cfg = load_config(c.config, cfg);
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) cfg.seed = *c.seed;
}

/// Defaults, then KOMEI_SEED, then the config file, then --set, then --seed.
TrainConfig build_config(const Common& c) {
  TrainConfig cfg;
  if (const char* env = std::getenv("KOMEI_SEED"); env && *env) {
    try {
      cfg.set("seed", env);
    } catch (const ConfigError&) {
      throw ConfigError(std::string("KOMEI_SEED is not an unsigned integer: '") + env + "'");
    }
  }
  apply_overrides(cfg, c);
  return cfg;
}

struct Tables {
  std::optional<EmbeddingTable> images, speech;

  EvidenceTables view() const {
    return {images ? &*images : nullptr, speech ? &*speech : nullptr};
  }
};

Tables load_tables(const std::string& images, const std::string& speech) {
  Tables t;
  if (!images.empty()) {
    t.images = load_embedding_table(images);
    if (t.images->modality() != Modality::image) throw FormatError(images + " is not an image table");
  }
  if (!speech.empty()) {
    t.speech = load_embedding_table(speech);
    if (t.speech->modality() != Modality::speech) throw FormatError(speech + " is not a speech table");
  }
  return t;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

json report_json(const EvalReport& r) {
  return json{{"acc1", r.acc[0]}, {"acc2", r.acc[1]}, {"acc3", r.acc[2]}, {"n", r.n},
              {"config_hash", hex64(r.config_hash)}};
}

// ---- commands ----------------------------------------------------------------------------

struct BuildCorpusArgs {
  Common common;
  std::string sentences, vocab, test_sentences, truth, out_dir;
};

void cmd_build_corpus(const BuildCorpusArgs& a, std::ostream& out) {
  const TrainConfig cfg = build_config(a.common);
  if (a.test_sentences.empty() != a.truth.empty()) {
    throw UsageError("--test-sentences and --truth must be given together");
  }
  const KeywordVocabulary vocab = load_vocabulary(a.vocab);
  auto parts = split(build_training_set(read_lines(a.sentences), vocab), cfg.split_ratio, cfg.seed);
  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  write_corpus(parts.train, dir / "train.jsonl");
  write_corpus(parts.val, dir / "val.jsonl");
  std::optional<std::size_t> n_test;
  if (!a.test_sentences.empty()) {
    const GroundTruthMap gt = load_ground_truth(a.truth, vocab);
    const auto test = build_test_set(read_lines(a.test_sentences), gt, &vocab);
    write_corpus(test, dir / "test.jsonl");
    n_test = test.size();
  }
  if (a.common.json) {
    json j{{"train", parts.train.size()}, {"val", parts.val.size()}};
    if (n_test) j["test"] = *n_test;
    out << j.dump() << '\n';
  } else {
    out << "train " << parts.train.size() << ", val " << parts.val.size();
    if (n_test) out << ", test " << *n_test;
    out << " samples written to " << a.out_dir << '\n';
  }
}

struct GenSyntheticArgs {
  Common common;
  std::string scenario = "overfit";
  std::string out_dir;
  SyntheticSpec spec;
};

void cmd_gen_synthetic(GenSyntheticArgs a, std::ostream& out) {
  const TrainConfig cfg = build_config(a.common);
  a.spec.scenario = parse_scenario(a.scenario);
  a.spec.seed = cfg.seed;
  const SyntheticData data = generate_synthetic(a.spec);
  const SyntheticCorpus corpus = build_synthetic_corpus(data, cfg.split_ratio, cfg.seed);
  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  write_vocabulary(data.vocab, dir / "vocab.json");
  write_ground_truth(data.truth, data.vocab, dir / "truth.json");
  write_lines(data.train_sentences, dir / "train.txt");
  write_lines(data.test_sentences, dir / "test.txt");
  if (data.images) write_table(*data.images, dir / "images.kome");
  if (data.speech) write_table(*data.speech, dir / "speech.kome");
  write_corpus(corpus.train, dir / "train.jsonl");
  write_corpus(corpus.val, dir / "val.jsonl");
  write_corpus(corpus.test, dir / "test.jsonl");
  if (a.common.json) {
    out << json{{"scenario", to_string(a.spec.scenario)},
                {"train", corpus.train.size()},
                {"val", corpus.val.size()},
                {"test", corpus.test.size()},
                {"tables", data.images.has_value()}}
               .dump()
        << '\n';
  } else {
    out << to_string(a.spec.scenario) << " corpus: train " << corpus.train.size() << ", val "
        << corpus.val.size() << ", test " << corpus.test.size() << " samples in " << a.out_dir << '\n';
  }
}

struct DataArgs {
  std::string corpus, val, vocab, images, speech;
};

void add_data(CLI::App* sub, DataArgs& d) {
  sub->add_option("--corpus", d.corpus, "training corpus (JSON lines)");
  sub->add_option("--val", d.val, "validation corpus; default: val-split samples of --corpus, else a seeded split");
  sub->add_option("--vocab", d.vocab, "keyword vocabulary JSON (category names, modality availability)");
  sub->add_option("--images", d.images, "image embedding table (KOME)");
  sub->add_option("--speech", d.speech, "speech embedding table (KOME)");
}

struct LoadedData {
  std::vector<MaskedSample> train, val;
  std::vector<std::string> categories;
  bool has_images = true, has_speech = true;
  Tables tables;
};

LoadedData load_data(DataArgs d, TrainConfig& cfg) {
  if (d.corpus.empty()) d.corpus = cfg.corpus;
  if (d.images.empty()) d.images = cfg.images;
  if (d.speech.empty()) d.speech = cfg.speech;
  if (d.vocab.empty()) d.vocab = cfg.vocab;
  if (d.corpus.empty()) throw UsageError("no training corpus given (--corpus or config key 'corpus')");
  LoadedData out;
  auto all = read_corpus(fs::path(d.corpus));
  if (!d.val.empty()) {
    out.train = std::move(all);
    out.val = read_corpus(fs::path(d.val));
  } else {
    for (auto& s : all) (s.split == Split::val ? out.val : out.train).push_back(std::move(s));
    if (out.val.empty()) {
      auto parts = split(std::move(out.train), cfg.split_ratio, cfg.seed);
      out.train = std::move(parts.train);
      out.val = std::move(parts.val);
    }
  }
  if (!d.vocab.empty()) {
    const KeywordVocabulary vocab = load_vocabulary(d.vocab);
    out.categories = vocab.categories;
    out.has_images = vocab.has_images;
    out.has_speech = vocab.has_speech;
    if (!vocab.has_images && cfg.use_image) {
      warn("vocabulary has no images: image stream disabled");
      cfg.use_image = false;
      if (!cfg.use_speech) cfg.ca = cfg.gu = cfg.sa = false;
    }
    if (!vocab.has_speech && cfg.use_speech) {
      warn("vocabulary has no speech: speech stream disabled");
      cfg.use_speech = false;
      if (!cfg.use_image) cfg.ca = cfg.gu = cfg.sa = false;
    }
  } else {
    std::vector<MaskedSample> both(out.train);
    both.insert(both.end(), out.val.begin(), out.val.end());
    out.categories = default_categories(both);
  }
  out.tables = load_tables(d.images, d.speech);
  return out;
}

struct TrainArgs {
  Common common;
  DataArgs data;
  std::string out_path, loss_curve;
  std::optional<std::size_t> epochs, batch_size, d_g;
  std::optional<double> lr;
};

void cmd_train(const TrainArgs& a, std::ostream& out) {
  TrainConfig cfg = build_config(a.common);
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.d_g) cfg.d_g = *a.d_g;
  if (a.lr) cfg.lr = *a.lr;
  if (a.out_path.empty()) throw UsageError("no checkpoint path given (--out)");
  LoadedData d = load_data(a.data, cfg);
  cfg.validate();
  const TrainResult r = train(cfg, TrainData{d.train, d.val, d.categories, d.tables.view()},
                              [&](std::size_t epoch, double j, std::optional<double> acc) {
                                if (a.common.json) return;
                                out << "epoch " << epoch << "  J " << j;
                                if (acc) out << "  val Acc@1 " << *acc;
                                out << '\n';
                              });
  r.model.save(a.out_path);
  if (!a.loss_curve.empty()) {
    auto f = open_out(a.loss_curve);
    write_loss_curve(f, r.curve);
  }
  if (a.common.json) {
    json j{{"epochs_run", r.epochs_run},
           {"best_epoch", r.best_epoch},
           {"steps", r.curve.size()},
           {"config_hash", hex64(r.model.config().hash())},
           {"checkpoint", a.out_path}};
    if (!r.val_acc1.empty()) j["best_val_acc1"] = r.val_acc1[r.best_epoch - 1];
    out << j.dump() << '\n';
  } else {
    out << "checkpoint " << a.out_path << " (config " << hex64(r.model.config().hash()) << ", best epoch "
        << r.best_epoch << ")\n";
  }
}

/// Checkpoint config with --config/--set/--seed applied; they may only
/// change fields that leave the model identical.
TrainConfig runtime_config(const Model& model, const Common& c) {
  TrainConfig cfg = model.config();
  apply_overrides(cfg, c);
  check_config_hash(model, cfg);
  return cfg;
}

struct EvalArgs {
  Common common;
  std::string checkpoint, test, images, speech, predictions;
};

void cmd_eval(const EvalArgs& a, std::ostream& out) {
  const Model model = Model::load(a.checkpoint);
  const TrainConfig cfg = runtime_config(model, a.common);
  const std::string test = a.test.empty() ? cfg.test : a.test;
  if (test.empty()) throw UsageError("no test corpus given (--test or config key 'test')");
  const Tables tables = load_tables(a.images.empty() ? cfg.images : a.images, a.speech.empty() ? cfg.speech : a.speech);
  const auto samples = read_corpus(fs::path(test));
  const EvalReport rep = evaluate(model, samples, tables.view());
  if (!a.predictions.empty()) {
    const ScoredSamples scored = score_samples(model, samples, tables.view());
    auto f = open_out(a.predictions);
    write_predictions(f, scored.ids, scored.gold, scored.scores);
  }
  if (a.common.json) {
    out << report_json(rep).dump() << '\n';
  } else {
    char line[160];
    std::snprintf(line, sizeof line, "Acc@1 %.4f  Acc@2 %.4f  Acc@3 %.4f  (n = %zu)\n", rep.acc[0], rep.acc[1],
                  rep.acc[2], rep.n);
    out << line;
  }
}

struct AblateArgs {
  Common common;
  DataArgs data;
  std::string grid = "modalities";
  std::string test, csv;
};

void cmd_ablate(const AblateArgs& a, std::ostream& out) {
  TrainConfig cfg = build_config(a.common);
  if (a.grid != "modalities" && a.grid != "components") {
    throw UsageError("--grid must be 'modalities' or 'components'");
  }
  const std::string test_path = a.test.empty() ? cfg.test : a.test;
  if (test_path.empty()) throw UsageError("no test corpus given (--test or config key 'test')");
  LoadedData d = load_data(a.data, cfg);
  const auto test = read_corpus(fs::path(test_path));
  const AblationData data{TrainData{d.train, d.val, d.categories, d.tables.view()}, test, d.has_images,
                          d.has_speech};
  const auto rows = a.grid == "modalities" ? ablate_modalities(cfg, data) : ablate_components(cfg, data);
  if (!a.csv.empty()) {
    auto f = open_out(a.csv);
    write_report_csv(f, rows);
  }
  if (a.common.json) {
    json arr = json::array();
    for (const auto& r : rows) {
      json j = report_json(r.report);
      j["row"] = r.name;
      j["params"] = r.audit.total;
      j["ca_params"] = r.audit.ca;
      j["gu_params"] = r.audit.gu;
      j["sa_params"] = r.audit.sa;
      arr.push_back(std::move(j));
    }
    out << json{{"grid", a.grid}, {"rows", arr}}.dump() << '\n';
  } else {
    write_report_table(out, rows);
  }
}

struct GradcheckArgs {
  Common common;
  std::size_t d_g = 8, batch = 4, categories = 3;
  double h = 1e-5, tol = 1e-4;
};

void cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  TrainConfig cfg = build_config(a.common);
  cfg.d_g = cfg.d_v = cfg.d_s = a.d_g;
  cfg.validate();
  if (!(a.h > 0.0)) throw ConfigError("--step must be positive");
  const GradCheckResult r = model_grad_check(cfg, a.batch, a.categories, a.h);
  const bool pass = r.max_rel_error < a.tol;
  if (a.common.json) {
    out << json{{"max_rel_error", r.max_rel_error}, {"tolerance", a.tol},  {"coordinates", r.coordinates},
                {"worst_param", r.worst_param},     {"worst_index", r.worst_index}, {"pass", pass}}
               .dump()
        << '\n';
  } else {
    out << "max relative error " << r.max_rel_error << " over " << r.coordinates << " coordinates (worst: "
        << r.worst_param << "[" << r.worst_index << "]), tolerance " << a.tol << ": " << (pass ? "PASS" : "FAIL")
        << '\n';
  }
  if (!pass) throw CheckFailed{};
}

struct DumpArgs {
  Common common;
  std::string checkpoint, samples, images, speech, out_path;
};

void cmd_dump_features(const DumpArgs& a, std::ostream& out) {
  const Model model = Model::load(a.checkpoint);
  const TrainConfig cfg = runtime_config(model, a.common);
  const Tables tables = load_tables(a.images.empty() ? cfg.images : a.images, a.speech.empty() ? cfg.speech : a.speech);
  const auto samples = read_corpus(fs::path(a.samples));
  if (samples.empty()) throw DataError("no samples in " + a.samples);
  const ScoredSamples scored = score_samples(model, samples, tables.view());
  auto f = open_out(a.out_path);
  write_features(f, scored.ids, scored.gold, scored.features);
  if (a.common.json) {
    out << json{{"rows", samples.size()}, {"columns", model.config().d_g + 2}, {"out", a.out_path}}.dump() << '\n';
  } else {
    out << samples.size() << " feature rows written to " << a.out_path << '\n';
  }
}

int report(std::ostream& err, const char* kind, const std::exception& e, int code) {
  err << "komei: " << kind << " error: " << e.what() << '\n';
  return code;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  ScopedWarningSink sink([&err](const std::string& m) { err << "komei: warning: " << m << '\n'; });

  CLI::App app{"Keyword-oriented multimodal euphemism identification", "komei"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "komei 0.1.0");

  BuildCorpusArgs bc;
  auto* s_bc = app.add_subcommand("build-corpus", "mask keywords in raw sentences and split train/val");
  add_common(s_bc, bc.common);
  s_bc->add_option("--sentences", bc.sentences, "raw training sentences, one per line")->required();
  s_bc->add_option("--vocab", bc.vocab, "keyword vocabulary JSON")->required();
  s_bc->add_option("--test-sentences", bc.test_sentences, "raw test sentences, one per line");
  s_bc->add_option("--truth", bc.truth, "euphemism ground truth JSON");
  s_bc->add_option("--out-dir", bc.out_dir, "output directory")->required();

  GenSyntheticArgs gs;
  auto* s_gs = app.add_subcommand("gen-synthetic", "write a synthetic corpus with a planted signal");
  add_common(s_gs, gs.common);
  s_gs->add_option("--scenario", gs.scenario, "overfit | image | speech")->capture_default_str();
  s_gs->add_option("--out-dir", gs.out_dir, "output directory")->required();
  s_gs->add_option("--train-sentences", gs.spec.train_sentences, "training sentences")->capture_default_str();
  s_gs->add_option("--test-sentences", gs.spec.test_sentences, "test sentences")->capture_default_str();
  s_gs->add_option("--categories", gs.spec.categories, "category count")->capture_default_str();
  s_gs->add_option("--context-words", gs.spec.context_words, "context vocabulary size")->capture_default_str();
  s_gs->add_option("--keywords", gs.spec.keywords_per_category, "keywords per category")->capture_default_str();
  s_gs->add_option("--dim", gs.spec.dim, "evidence width")->capture_default_str();
  s_gs->add_option("--noise", gs.spec.noise, "noise around planted prototypes")->capture_default_str();

  TrainArgs tr;
  auto* s_tr = app.add_subcommand("train", "train a model and write a checkpoint");
  add_common(s_tr, tr.common);
  add_data(s_tr, tr.data);
  s_tr->add_option("--out", tr.out_path, "checkpoint path");
  s_tr->add_option("--loss-curve", tr.loss_curve, "write the per-step loss curve CSV");
  s_tr->add_option("--epochs", tr.epochs, "override config epochs");
  s_tr->add_option("--batch-size", tr.batch_size, "override config batch_size");
  s_tr->add_option("--dg", tr.d_g, "override config d_g");
  s_tr->add_option("--lr", tr.lr, "override config lr");

  EvalArgs ev;
  auto* s_ev = app.add_subcommand("eval", "report Acc@1/2/3 of a checkpoint");
  add_common(s_ev, ev.common);
  s_ev->add_option("--checkpoint", ev.checkpoint, "checkpoint path")->required();
  s_ev->add_option("--test", ev.test, "test corpus (JSON lines)");
  s_ev->add_option("--images", ev.images, "image embedding table (KOME)");
  s_ev->add_option("--speech", ev.speech, "speech embedding table (KOME)");
  s_ev->add_option("--predictions", ev.predictions, "write the top-3 prediction CSV");

  AblateArgs ab;
  auto* s_ab = app.add_subcommand("ablate", "run the modality or component ablation grid");
  add_common(s_ab, ab.common);
  add_data(s_ab, ab.data);
  s_ab->add_option("--grid", ab.grid, "modalities | components")->capture_default_str();
  s_ab->add_option("--test", ab.test, "test corpus (JSON lines)");
  s_ab->add_option("--csv", ab.csv, "also write the report as CSV");

  GradcheckArgs gc;
  auto* s_gc = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients of J");
  add_common(s_gc, gc.common);
  s_gc->add_option("--dg", gc.d_g, "shared width d_g")->capture_default_str();
  s_gc->add_option("--batch", gc.batch, "toy batch size")->capture_default_str();
  s_gc->add_option("--categories", gc.categories, "toy category count")->capture_default_str();
  s_gc->add_option("--step", gc.h, "finite-difference step")->capture_default_str();
  s_gc->add_option("--tol", gc.tol, "maximum relative error")->capture_default_str();

  DumpArgs du;
  auto* s_du = app.add_subcommand("dump-features", "write fused features per sample as CSV");
  add_common(s_du, du.common);
  s_du->add_option("--checkpoint", du.checkpoint, "checkpoint path")->required();
  s_du->add_option("--samples", du.samples, "samples (JSON lines)")->required();
  s_du->add_option("--images", du.images, "image embedding table (KOME)");
  s_du->add_option("--speech", du.speech, "speech embedding table (KOME)");
  s_du->add_option("--out", du.out_path, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    if (active == s_bc) cmd_build_corpus(bc, out);
    else if (active == s_gs) cmd_gen_synthetic(gs, out);
    else if (active == s_tr) cmd_train(tr, out);
    else if (active == s_ev) cmd_eval(ev, out);
    else if (active == s_ab) cmd_ablate(ab, out);
    else if (active == s_gc) cmd_gradcheck(gc, out);
    else if (active == s_du) cmd_dump_features(du, out);
  } catch (const UsageError& e) {
    err << "komei: usage error: " << e.what() << "\n\n" << active->help();
    return kUsage;
  } catch (const CheckFailed&) {
    return kCheck;
  } catch (const ConfigError& e) {
    return report(err, "config", e, kUsage);
  } catch (const ParseError& e) {
    return report(err, "parse", e, kData);
  } catch (const FormatError& e) {
    return report(err, "format", e, kData);
  } catch (const IoError& e) {
    return report(err, "io", e, kData);
  } catch (const DataError& e) {
    return report(err, "data", e, kData);
  } catch (const Error& e) {
    return report(err, "numeric", e, kData);
  } catch (const std::filesystem::filesystem_error& e) {
    return report(err, "io", e, kData);
  }
  return kOk;
}

}  // namespace komei::cli
