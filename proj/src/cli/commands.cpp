// SPDX-License-Identifier: Apache-2.0

#include "audiolab/cli/commands.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "audiolab/bootstrap/bootstrap.hpp"
#include "audiolab/cli/config.hpp"
#include "audiolab/contrastive/trainer.hpp"
#include "audiolab/diffcore/gradsuite.hpp"
#include "audiolab/evalsuite/evalsuite.hpp"

namespace audiolab::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using clock_type = std::chrono::steady_clock;

namespace {

struct RunContext {
  json cfg;
  std::uint64_t seed = 0;
  fs::path out;
  clock_type::time_point started = clock_type::now();

  fs::path corpus_dir() const { return out / "corpus"; }
  fs::path caption_manifest() const { return corpus_dir() / "caption.jsonl"; }
  fs::path tagonly_manifest() const { return corpus_dir() / "tagonly.jsonl"; }
  fs::path single_event_manifest() const { return corpus_dir() / "single_event.jsonl"; }
  fs::path synthetic_manifest() const { return out / "synthetic.jsonl"; }
  fs::path vocab_path() const { return corpus_dir() / "vocab.txt"; }
  fs::path captioner_ckpt() const { return out / "captioner.ckpt"; }
  fs::path stage2_ckpt() const { return out / "pretrain" / "stage2.ckpt"; }

  double elapsed() const {
    return std::chrono::duration<double>(clock_type::now() - started).count();
  }
};

RunContext make_context(const std::string& config_path, const std::string& profile,
                        long long seed_override, const std::string& out_override) {
  RunContext ctx;
  ctx.cfg = load_config(config_path, profile.empty() ? "desk" : profile);
  if (seed_override >= 0) ctx.cfg["seed"] = static_cast<std::uint64_t>(seed_override);
  if (!out_override.empty()) ctx.cfg["out_dir"] = out_override;
  ctx.seed = ctx.cfg.at("seed").get<std::uint64_t>();
  ctx.out = fs::path(ctx.cfg.at("out_dir").get<std::string>());
  fs::create_directories(ctx.out);
  std::ofstream resolved(ctx.out / "resolved_config.json");
  resolved << ctx.cfg.dump(2) << "\n";
  return ctx;
}

void write_json(const fs::path& path, const json& j) {
  fs::create_directories(path.parent_path());
  std::ofstream of(path);
  if (!of) throw ParseError("cannot open " + path.string() + " for writing");
  of << j.dump(2) << "\n";
}

void print_report(const evalsuite::MetricReport& report) {
  std::cout << "== " << report.task << " (" << report.dataset_id << ") seed " << report.seed
            << "\n";
  for (const auto& [name, value] : report.metrics) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", value);
    std::cout << "  " << name << " = " << buf << "\n";
  }
}

textproc::Vocabulary require_vocab(const RunContext& ctx) {
  if (!fs::exists(ctx.vocab_path()))
    throw ConfigError("missing vocabulary file " + ctx.vocab_path().string() +
                      " (run make-corpus first)");
  return textproc::load_vocab(ctx.vocab_path().string());
}

toygen::Corpus require_manifest(const fs::path& path, const std::string& field) {
  if (!fs::exists(path))
    throw ConfigError("missing manifest for '" + field + "': " + path.string());
  return toygen::read_manifest(path.string());
}

std::uint64_t manifest_fingerprint(const fs::path& path) {
  return contrastive::file_hash(path.string());
}

// ---- subcommand bodies ----

int cmd_make_corpus(RunContext& ctx) {
  const auto reg = toygen::default_registry();
  toygen::CorpusConfig cc = corpus_config_from(ctx.cfg);
  const fs::path wav_dir = ctx.corpus_dir() / "wav";
  toygen::GeneratedCorpora g = toygen::generate_corpus(reg, cc, ctx.seed, wav_dir.string());
  fs::create_directories(ctx.corpus_dir());
  toygen::write_manifest(ctx.caption_manifest().string(), g.caption);
  toygen::write_manifest(ctx.tagonly_manifest().string(), g.tag_only);

  // single-event clips over the caption corpus classes, for zero-shot and
  // classifier evaluation
  const std::vector<std::string> known = g.caption.tag_set();
  toygen::Corpus single = toygen::generate_single_event_set(
      reg, known, ctx.cfg.at("corpus").at("zero_shot_per_class").get<std::size_t>(),
      cc.sample_rate, ctx.seed + 0x5e, (ctx.corpus_dir() / "wav_single").string(), "single");
  toygen::write_manifest(ctx.single_event_manifest().string(), single);

  std::vector<std::string> captions;
  for (const auto* it : g.caption.split("train")) captions.push_back(it->caption);
  textproc::Vocabulary vocab =
      textproc::build_vocab(captions, ctx.cfg.at("vocab").at("min_count").get<std::size_t>());
  textproc::save_vocab(ctx.vocab_path().string(), vocab);

  json report;
  report["caption_items"] = g.caption.items.size();
  report["tag_only_items"] = g.tag_only.items.size();
  report["single_event_items"] = single.items.size();
  report["vocab_size"] = vocab.size();
  report["caption_manifest_fingerprint"] = hex64(manifest_fingerprint(ctx.caption_manifest()));
  report["tagonly_manifest_fingerprint"] = hex64(manifest_fingerprint(ctx.tagonly_manifest()));
  report["seed"] = ctx.seed;
  write_json(ctx.out / "corpus_report.json", report);
  std::cout << "corpus: " << g.caption.items.size() << " captioned + "
            << g.tag_only.items.size() << " tag-only clips, vocab " << vocab.size() << "\n";
  return 0;
}

int cmd_train_captioner(RunContext& ctx) {
  const textproc::Vocabulary vocab = require_vocab(ctx);
  toygen::Corpus caption = require_manifest(ctx.caption_manifest(), "caption corpus");
  audiofront::MelConfig mc = mel_config_from(ctx.cfg);
  audiofront::FeatureStore feats(mc);

  captioner::CaptionerConfig cfg = captioner_config_from(ctx.cfg, vocab.size(),
                                                         caption.tag_set(), mc.fingerprint());
  captioner::CaptionModel model(cfg, ctx.seed + 0x11);
  captioner::CaptionTrainConfig tc = captioner_train_config_from(ctx.cfg, ctx.seed + 0x21);
  captioner::CaptionTrainResult result =
      captioner::train_captioner(model, caption.split("train"), caption.split("val"), feats,
                                 vocab, tc);
  captioner::save_caption_model(ctx.captioner_ckpt().string(), model, "captioner");

  {
    std::ofstream trace(ctx.out / "captioner_trace.csv");
    trace << "step,loss,lr\n";
    for (const auto& row : result.trace)
      trace << row.step << "," << row.loss << "," << row.lr << "\n";
  }
  evalsuite::MetricReport report;
  report.task = "train-captioner";
  report.dataset_id = ctx.caption_manifest().string();
  report.checkpoint_id = hex64(contrastive::file_hash(ctx.captioner_ckpt().string()));
  report.seed = ctx.seed;
  report.metrics["best_val_ce"] = result.best_val_ce;
  report.metrics["best_epoch"] = static_cast<double>(result.best_epoch);
  report.metrics["final_train_loss"] = result.trace.empty() ? 0.0 : result.trace.back().loss;
  report.wall_clock_sec = ctx.elapsed();
  report.save((ctx.out / "captioner_report.json").string());
  print_report(report);
  return 0;
}

int cmd_bootstrap(RunContext& ctx) {
  const textproc::Vocabulary vocab = require_vocab(ctx);
  toygen::Corpus caption = require_manifest(ctx.caption_manifest(), "caption corpus");
  toygen::Corpus tag_only = require_manifest(ctx.tagonly_manifest(), "tag-only corpus");
  if (!fs::exists(ctx.captioner_ckpt()))
    throw ConfigError("missing captioner checkpoint " + ctx.captioner_ckpt().string());
  captioner::CaptionModel model = captioner::load_caption_model(ctx.captioner_ckpt().string());

  audiofront::FeatureStore feats(mel_config_from(ctx.cfg));
  const std::string mode_name = ctx.cfg.at("bootstrap").at("filter_mode").get<std::string>();
  const bootstrap::FilterMode mode = mode_name == "strict"
                                         ? bootstrap::FilterMode::kDropIfAnyUnknown
                                         : bootstrap::FilterMode::kDropIfAllUnknown;
  bootstrap::FilterReport freport;
  toygen::Corpus filtered =
      bootstrap::filter_by_tag_vocab(tag_only, caption.tag_set(), mode, &freport);
  bootstrap::SyntheticReport sreport;
  toygen::Corpus synthetic = bootstrap::generate_synthetic_corpus(
      model, feats, vocab, filtered,
      ctx.cfg.at("bootstrap").at("beam_size").get<std::size_t>(), &sreport);
  toygen::write_manifest(ctx.synthetic_manifest().string(), synthetic);

  // grammar-recovery oracle over the generated captions
  const auto reg = toygen::default_registry();
  std::size_t full = 0;
  for (const auto& it : synthetic.items) {
    const auto rec = toygen::recover_tags(it.caption, reg);
    std::size_t hit = 0;
    for (const auto& t : it.tags)
      hit += std::find(rec.begin(), rec.end(), t) != rec.end() ? 1 : 0;
    full += hit == it.tags.size() ? 1 : 0;
  }

  json report;
  report["kept"] = freport.kept;
  report["dropped"] = freport.dropped;
  report["synthetic_pairs"] = synthetic.items.size();
  report["forced_decodes"] = sreport.forced;
  report["tag_phrase_recovery"] =
      synthetic.items.empty() ? 0.0 : static_cast<double>(full) / synthetic.items.size();
  report["manifest_fingerprint"] = hex64(manifest_fingerprint(ctx.synthetic_manifest()));
  write_json(ctx.out / "bootstrap_report.json", report);
  std::cout << "bootstrap: kept " << freport.kept << " dropped " << freport.dropped
            << ", recovery " << report["tag_phrase_recovery"] << "\n";
  return 0;
}

contrastive::PairDataset dataset_from(const std::vector<const toygen::AudioTextExample*>& items,
                                      audiofront::FeatureStore& feats,
                                      const textproc::Vocabulary& vocab) {
  return contrastive::make_pair_dataset(items, feats, vocab);
}

int cmd_pretrain(RunContext& ctx) {
  const textproc::Vocabulary vocab = require_vocab(ctx);
  toygen::Corpus caption = require_manifest(ctx.caption_manifest(), "caption corpus");
  toygen::Corpus synthetic = require_manifest(ctx.synthetic_manifest(), "synthetic corpus");
  audiofront::MelConfig mc = mel_config_from(ctx.cfg);
  audiofront::FeatureStore feats(mc);

  encoders::BiEncoderConfig bc = biencoder_config_from(ctx.cfg, vocab.size(), mc.fingerprint());
  encoders::BiEncoderModel model(bc, ctx.seed + 0x31);

  std::vector<const toygen::AudioTextExample*> synth_items;
  for (const auto& it : synthetic.items) synth_items.push_back(&it);
  contrastive::PairDataset ds_synth = dataset_from(synth_items, feats, vocab);
  contrastive::PairDataset ds_train = dataset_from(caption.split("train"), feats, vocab);
  contrastive::PairDataset ds_val = dataset_from(caption.split("val"), feats, vocab);

  contrastive::TrainConfig s1 =
      stage_config_from(ctx.cfg.at("pretrain").at("stage1"), ctx.seed + 0x41);
  contrastive::TrainConfig s2 =
      stage_config_from(ctx.cfg.at("pretrain").at("stage2"), ctx.seed + 0x51);
  contrastive::TwoStageArtifacts art = contrastive::pretrain_two_stage(
      model, ds_synth, ds_train, ds_val, s1, s2, (ctx.out / "pretrain").string());

  evalsuite::MetricReport report;
  report.task = "pretrain";
  report.dataset_id = ctx.synthetic_manifest().string();
  report.checkpoint_id = hex64(contrastive::file_hash(art.stage2_ckpt));
  report.seed = ctx.seed;
  report.metrics["stage1_best_val_r1"] = art.stage1.best_metric;
  report.metrics["stage1_best_iter"] = static_cast<double>(art.stage1.best_iter);
  report.metrics["stage2_best_val_r1"] = art.stage2.best_metric;
  report.metrics["stage2_best_iter"] = static_cast<double>(art.stage2.best_iter);
  report.metrics["temperature"] = model.temperature();
  report.wall_clock_sec = ctx.elapsed();
  report.save((ctx.out / "pretrain_report.json").string());
  print_report(report);
  return 0;
}

encoders::BiEncoderModel load_biencoder(const fs::path& ckpt) {
  if (!fs::exists(ckpt)) throw ConfigError("missing checkpoint " + ckpt.string());
  contrastive::CheckpointMeta meta = contrastive::read_checkpoint_meta(ckpt.string());
  encoders::BiEncoderModel model(encoders::BiEncoderConfig::from_json(meta.config), 0);
  contrastive::load_checkpoint(ckpt.string(), model.params());
  return model;
}

int cmd_finetune_retrieval(RunContext& ctx, const std::string& ckpt_arg) {
  const textproc::Vocabulary vocab = require_vocab(ctx);
  toygen::Corpus caption = require_manifest(ctx.caption_manifest(), "caption corpus");
  const fs::path ckpt = ckpt_arg.empty() ? ctx.stage2_ckpt() : fs::path(ckpt_arg);
  encoders::BiEncoderModel model = load_biencoder(ckpt);

  audiofront::FeatureStore feats(mel_config_from(ctx.cfg));
  contrastive::PairDataset train = dataset_from(caption.split("train"), feats, vocab);
  contrastive::PairDataset val = dataset_from(caption.split("val"), feats, vocab);
  contrastive::PairDataset test = dataset_from(caption.split("test"), feats, vocab);

  evalsuite::FinetuneRetrievalConfig fc = finetune_config_from(ctx.cfg, ctx.seed + 0x61);
  evalsuite::FinetuneResult result = evalsuite::finetune_retrieval(model, train, val, test, fc);

  contrastive::CheckpointMeta meta;
  meta.stage = "finetune-retrieval";
  meta.config = model.config().to_json();
  meta.config_fingerprint = model.config().fingerprint();
  const fs::path out_ckpt = ctx.out / "finetune.ckpt";
  contrastive::save_checkpoint(out_ckpt.string(), model.params(), meta);
  contrastive::save_trace_csv((ctx.out / "finetune_trace.csv").string(), result.stage.trace);

  result.report.checkpoint_id = hex64(contrastive::file_hash(out_ckpt.string()));
  result.report.seed = ctx.seed;
  result.report.wall_clock_sec = ctx.elapsed();
  result.report.save((ctx.out / "finetune_report.json").string());
  print_report(result.report);
  return 0;
}

std::pair<std::vector<std::string>, toygen::Corpus> load_single_event(RunContext& ctx,
                                                                      const toygen::Corpus& cap) {
  toygen::Corpus single = require_manifest(ctx.single_event_manifest(), "single-event corpus");
  return {cap.tag_set(), single};
}

int cmd_finetune_classifier(RunContext& ctx, const std::string& ckpt_arg) {
  const textproc::Vocabulary vocab = require_vocab(ctx);
  toygen::Corpus caption = require_manifest(ctx.caption_manifest(), "caption corpus");
  auto [labels, single] = load_single_event(ctx, caption);
  const fs::path ckpt = ckpt_arg.empty() ? ctx.stage2_ckpt() : fs::path(ckpt_arg);
  encoders::BiEncoderModel model = load_biencoder(ckpt);
  audiofront::FeatureStore feats(mel_config_from(ctx.cfg));

  // split the single-event set in halves: even items train, odd items test
  std::vector<const audiofront::MelSpectrogram*> train_mels, test_mels;
  std::vector<std::vector<int>> train_rows;
  std::vector<std::size_t> test_truth;
  for (std::size_t i = 0; i < single.items.size(); ++i) {
    const auto& it = single.items[i];
    const auto& mel = feats.from_wav(it.clip_id, it.wav_path);
    std::size_t cls = labels.size();
    for (std::size_t c = 0; c < labels.size(); ++c)
      if (labels[c] == it.tags[0]) cls = c;
    if (cls == labels.size()) continue;  // holdout-only class
    if (i % 2 == 0) {
      train_mels.push_back(&mel);
      std::vector<int> row(labels.size(), 0);
      row[cls] = 1;
      train_rows.push_back(std::move(row));
    } else {
      test_mels.push_back(&mel);
      test_truth.push_back(cls);
    }
  }

  const std::uint64_t before = model.params().bytes_hash();
  evalsuite::ClassifierConfig cc = classifier_config_from(ctx.cfg, labels.size(), ctx.seed + 0x71);
  evalsuite::TrainedClassifier head =
      evalsuite::train_classifier(model, train_mels, train_rows, cc);
  const bool frozen = model.params().bytes_hash() == before;

  const std::vector<double> logits = evalsuite::classifier_scores(model, head, test_mels);
  std::vector<std::size_t> preds(test_mels.size());
  for (std::size_t i = 0; i < test_mels.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < labels.size(); ++c)
      if (logits[i * labels.size() + c] > logits[i * labels.size() + best]) best = c;
    preds[i] = best;
  }

  evalsuite::MetricReport report;
  report.task = "finetune-classifier";
  report.dataset_id = ctx.single_event_manifest().string();
  report.checkpoint_id = hex64(contrastive::file_hash(ckpt.string()));
  report.seed = ctx.seed;
  report.metrics["accuracy"] = evalsuite::accuracy(preds, test_truth);
  report.metrics["encoder_frozen"] =
      cc.mode == evalsuite::ClassifierConfig::Mode::kLinearProbe ? (frozen ? 1.0 : 0.0) : 0.0;
  report.metrics["final_loss"] = head.loss_trace.empty() ? 0.0 : head.loss_trace.back();
  report.wall_clock_sec = ctx.elapsed();
  report.save((ctx.out / "classifier_report.json").string());
  print_report(report);
  if (cc.mode == evalsuite::ClassifierConfig::Mode::kLinearProbe && !frozen)
    throw StateError("linear probe modified encoder parameters");
  return 0;
}

int cmd_eval_retrieval(RunContext& ctx, const std::string& ckpt_arg, const std::string& split) {
  const textproc::Vocabulary vocab = require_vocab(ctx);
  toygen::Corpus caption = require_manifest(ctx.caption_manifest(), "caption corpus");
  const fs::path ckpt = ckpt_arg.empty() ? ctx.stage2_ckpt() : fs::path(ckpt_arg);
  encoders::BiEncoderModel model = load_biencoder(ckpt);
  audiofront::FeatureStore feats(mel_config_from(ctx.cfg));
  contrastive::PairDataset pairs = dataset_from(caption.split(split), feats, vocab);
  evalsuite::MetricReport report = evalsuite::eval_retrieval(model, pairs, split);
  report.checkpoint_id = hex64(contrastive::file_hash(ckpt.string()));
  report.seed = ctx.seed;
  report.wall_clock_sec = ctx.elapsed();
  report.save((ctx.out / ("retrieval_" + split + "_report.json")).string());
  print_report(report);
  return 0;
}

int cmd_eval_zero_shot(RunContext& ctx, const std::string& ckpt_arg) {
  const textproc::Vocabulary vocab = require_vocab(ctx);
  toygen::Corpus caption = require_manifest(ctx.caption_manifest(), "caption corpus");
  auto [labels, single] = load_single_event(ctx, caption);
  const fs::path ckpt = ckpt_arg.empty() ? ctx.stage2_ckpt() : fs::path(ckpt_arg);
  encoders::BiEncoderModel model = load_biencoder(ckpt);
  audiofront::FeatureStore feats(mel_config_from(ctx.cfg));

  std::vector<const audiofront::MelSpectrogram*> mels;
  std::vector<std::size_t> truth;
  std::vector<int> truth_rows;
  for (const auto& it : single.items) {
    std::size_t cls = labels.size();
    for (std::size_t c = 0; c < labels.size(); ++c)
      if (labels[c] == it.tags[0]) cls = c;
    if (cls == labels.size()) continue;
    mels.push_back(&feats.from_wav(it.clip_id, it.wav_path));
    truth.push_back(cls);
  }
  evalsuite::ZeroShotResult zs = evalsuite::zero_shot_classify(model, mels, labels, vocab);
  std::vector<int> truths(mels.size() * labels.size(), 0);
  for (std::size_t i = 0; i < truth.size(); ++i) truths[i * labels.size() + truth[i]] = 1;

  evalsuite::MetricReport report;
  report.task = "eval-zero-shot";
  report.dataset_id = ctx.single_event_manifest().string();
  report.checkpoint_id = hex64(contrastive::file_hash(ckpt.string()));
  report.seed = ctx.seed;
  report.metrics["accuracy"] = evalsuite::accuracy(zs.predictions, truth);
  report.metrics["map"] =
      evalsuite::mean_average_precision(zs.scores, truths, mels.size(), labels.size());
  report.wall_clock_sec = ctx.elapsed();
  report.save((ctx.out / "zero_shot_report.json").string());
  print_report(report);
  return 0;
}

int cmd_eval_caption(RunContext& ctx, const std::string& ckpt_arg) {
  const textproc::Vocabulary vocab = require_vocab(ctx);
  toygen::Corpus caption = require_manifest(ctx.caption_manifest(), "caption corpus");
  const fs::path ckpt = ckpt_arg.empty() ? ctx.captioner_ckpt() : fs::path(ckpt_arg);
  if (!fs::exists(ckpt)) throw ConfigError("missing captioner checkpoint " + ckpt.string());
  captioner::CaptionModel model = captioner::load_caption_model(ckpt.string());
  audiofront::FeatureStore feats(mel_config_from(ctx.cfg));
  const std::size_t beam = ctx.cfg.at("eval").at("beam_size").get<std::size_t>();

  std::vector<evalsuite::Sentence> cands;
  std::vector<std::vector<evalsuite::Sentence>> refs;
  std::ofstream gen(ctx.out / "generated_captions.jsonl");
  for (const auto* it : caption.split("test")) {
    const auto& mel = feats.from_wav(it->clip_id, it->wav_path);
    captioner::BeamHypothesis hyp = model.caption_clip(mel, it->tags, beam);
    textproc::TokenSequence seq;
    seq.ids = hyp.tokens;
    const std::string text = textproc::detokenize(seq, vocab);
    json line = {{"clip_id", it->clip_id}, {"caption", text}, {"score", hyp.score}};
    gen << line.dump() << "\n";
    cands.push_back(textproc::normalize_words(text));
    refs.push_back({textproc::normalize_words(it->caption)});
  }

  double bleu_sum = 0.0, rouge_sum = 0.0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    bleu_sum += evalsuite::bleu4(cands[i], refs[i]);
    rouge_sum += evalsuite::rouge_l(cands[i], refs[i]);
  }
  const std::vector<double> cider_scores = evalsuite::cider(cands, refs);
  double cider_sum = 0.0;
  for (double v : cider_scores) cider_sum += v;

  evalsuite::MetricReport report;
  report.task = "eval-caption";
  report.dataset_id = ctx.caption_manifest().string();
  report.checkpoint_id = hex64(contrastive::file_hash(ckpt.string()));
  report.seed = ctx.seed;
  report.metrics["bleu4"] = bleu_sum / static_cast<double>(cands.size());
  report.metrics["rouge_l"] = rouge_sum / static_cast<double>(cands.size());
  report.metrics["cider"] = cider_sum / static_cast<double>(cands.size());
  report.wall_clock_sec = ctx.elapsed();
  report.save((ctx.out / "caption_eval_report.json").string());
  print_report(report);
  return 0;
}

int cmd_gradcheck(RunContext& ctx) {
  auto checks = diff::layer_gradient_checks(ctx.seed);
  for (auto& c : contrastive::infonce_gradient_checks(ctx.seed + 1)) checks.push_back(c);
  for (auto& c : captioner::ce_gradient_checks(ctx.seed + 2)) checks.push_back(c);
  const auto lines = diff::run_gradient_suite(checks, 1e-5, 1e-4);
  bool all = true;
  std::printf("%-28s %14s %9s %6s\n", "check", "max_rel_error", "excluded", "pass");
  for (const auto& l : lines) {
    std::printf("%-28s %14.3e %9zu %6s\n", l.name.c_str(), l.max_rel_error, l.excluded,
                l.pass ? "yes" : "NO");
    all = all && l.pass;
  }
  std::printf("gradient suite: %s (%zu checks)\n", all ? "all pass" : "FAILURES", lines.size());
  return all ? 0 : 1;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"desk-scale audio-language pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, profile, out_override, ckpt, split = "test";
  long long seed_override = -1;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--profile", profile, "configuration profile (paper|desk)")
      ->check(CLI::IsMember({"paper", "desk"}));
  app.add_option("--seed", seed_override, "seed override");
  app.add_option("--out", out_override, "run directory override");

  auto* sc_corpus = app.add_subcommand("make-corpus", "generate the toy corpora");
  auto* sc_captioner = app.add_subcommand("train-captioner", "train the tag-guided captioner");
  auto* sc_bootstrap = app.add_subcommand("bootstrap", "filter + synthesize captions");
  auto* sc_pretrain = app.add_subcommand("pretrain", "two-stage contrastive pre-training");
  auto* sc_ft_retr = app.add_subcommand("finetune-retrieval", "fine-tune the bi-encoder");
  auto* sc_ft_cls = app.add_subcommand("finetune-classifier", "train a classification head");
  auto* sc_ev_retr = app.add_subcommand("eval-retrieval", "recall@K evaluation");
  auto* sc_ev_zs = app.add_subcommand("eval-zero-shot", "zero-shot classification");
  auto* sc_ev_cap = app.add_subcommand("eval-caption", "captioning metrics");
  auto* sc_gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");

  for (auto* sc : {sc_ft_retr, sc_ft_cls, sc_ev_retr, sc_ev_zs, sc_ev_cap})
    sc->add_option("--checkpoint", ckpt, "checkpoint path override");
  sc_ev_retr->add_option("--split", split, "manifest split to evaluate");

  std::vector<const char*> argv;
  argv.push_back("audiolab");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    RunContext ctx = make_context(config_path, profile, seed_override, out_override);
    if (sc_corpus->parsed()) return cmd_make_corpus(ctx);
    if (sc_captioner->parsed()) return cmd_train_captioner(ctx);
    if (sc_bootstrap->parsed()) return cmd_bootstrap(ctx);
    if (sc_pretrain->parsed()) return cmd_pretrain(ctx);
    if (sc_ft_retr->parsed()) return cmd_finetune_retrieval(ctx, ckpt);
    if (sc_ft_cls->parsed()) return cmd_finetune_classifier(ctx, ckpt);
    if (sc_ev_retr->parsed()) return cmd_eval_retrieval(ctx, ckpt, split);
    if (sc_ev_zs->parsed()) return cmd_eval_zero_shot(ctx, ckpt);
    if (sc_ev_cap->parsed()) return cmd_eval_caption(ctx, ckpt);
    if (sc_gradcheck->parsed()) return cmd_gradcheck(ctx);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace audiolab::cli
