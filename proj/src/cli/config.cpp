// SPDX-License-Identifier: Apache-2.0

#include "audiolab/cli/config.hpp"

#include <fstream>

namespace audiolab::cli {

using nlohmann::json;

json default_config(const std::string& profile) {
  const bool paper = profile == "paper";
  if (!paper && profile != "desk")
    throw ConfigError("default_config: unknown profile '" + profile + "' (paper|desk)");

  json cfg;
  cfg["profile"] = profile;
  cfg["seed"] = 0;
  cfg["out_dir"] = "runs/default";

  cfg["corpus"] = {{"n_train", 500},
                   {"n_val", 100},
                   {"n_test", 100},
                   {"n_tag_only", 2000},
                   {"tag_holdout", json::array({"fast_warble", "sharp_buzz"})},
                   {"sample_rate", 16000},
                   {"clip_dur_min", 2.0},
                   {"clip_dur_max", 4.0},
                   {"p_one", 0.15},
                   {"p_two", 0.65},
                   {"p_three", 0.20},
                   {"tagonly_p_one", 0.20},
                   {"tagonly_p_two", 0.70},
                   {"tagonly_p_three", 0.10},
                   {"unique_eval_captions", true},
                   {"zero_shot_per_class", 15}};

  // the frontend keeps its own desk defaults in both profiles
  cfg["mel"] = {{"sample_rate", 16000}, {"win", 512},     {"hop", paper ? 160 : 640},
                {"n_fft", 512},         {"mel_bins", 64}, {"fmin", 50.0},
                {"fmax", 8000.0},       {"floor_eps", 1e-10}};

  cfg["vocab"] = {{"min_count", 1}};

  if (paper) {
    cfg["biencoder"] = {{"conv_widths", json::array({64, 64, 128, 128, 256, 256, 512, 512, 1024,
                                                     1024, 2048, 2048})},
                        {"text_width", 512},
                        {"text_layers", 8},
                        {"text_heads", 8},
                        {"text_ffn", 2048},
                        {"max_text_len", 32},
                        {"embed_dim", 512},
                        {"init_temperature", 0.07},
                        {"temperature_floor", 1e-3},
                        {"bn_momentum", 0.9}};
    cfg["captioner"] = {{"time_pool", 1},  {"enc_hidden", 256}, {"enc_layers", 3},
                        {"dec_width", 256}, {"dec_layers", 2},  {"dec_heads", 4},
                        {"dec_ffn", 1024},  {"max_len", 20}};
    cfg["captioner_train"] = {{"epochs", 25},      {"batch_size", 64}, {"peak_lr", 5e-4},
                              {"end_lr", 5e-7},    {"warmup_frac", 0.1},
                              {"crop_frames", 1001}, {"random_crops", true}};
    cfg["pretrain"] = {{"stage1", {{"batch_size", 128},
                                   {"total_iters", 200000},
                                   {"warmup_iters", 10000},
                                   {"max_lr", 1e-4},
                                   {"validate_every", 500},
                                   {"val_pairs", 1200},
                                   {"crop_frames", 1001},
                                   {"select_by", "retrieval"}}},
                       {"stage2", {{"batch_size", 128},
                                   {"total_iters", 15000},
                                   {"warmup_iters", 750},
                                   {"max_lr", 1e-4},
                                   {"validate_every", 750},
                                   {"val_pairs", 1200},
                                   {"crop_frames", 1001},
                                   {"select_by", "retrieval"}}}};
    cfg["finetune_retrieval"] = {{"epochs", 20},
                                 {"batch_size", 128},
                                 {"max_lr", 5e-5},
                                 {"validate_every", 0},
                                 {"crop_frames", 1001}};
    cfg["classifier"] = {{"mode", "linear_probe"}, {"task", "single_label"}, {"steps", 300},
                         {"batch_size", 16},       {"lr", 1e-2},             {"crop_frames", 1001}};
  } else {
    cfg["biencoder"] = {{"conv_widths", json::array({8, 16, 24, 32, 48, 64})},
                        {"text_width", 64},
                        {"text_layers", 2},
                        {"text_heads", 4},
                        {"text_ffn", 128},
                        {"max_text_len", 32},
                        {"embed_dim", 128},
                        {"init_temperature", 0.07},
                        {"temperature_floor", 1e-3},
                        {"bn_momentum", 0.9}};
    cfg["captioner"] = {{"time_pool", 2},  {"enc_hidden", 32}, {"enc_layers", 3},
                        {"dec_width", 96}, {"dec_layers", 2},  {"dec_heads", 4},
                        {"dec_ffn", 192},  {"max_len", 20}};
    cfg["captioner_train"] = {{"epochs", 55},      {"batch_size", 16}, {"peak_lr", 3e-3},
                              {"end_lr", 3e-5},    {"warmup_frac", 0.1},
                              {"crop_frames", 101}, {"random_crops", true}};
    cfg["pretrain"] = {{"stage1", {{"batch_size", 32},
                                   {"total_iters", 800},
                                   {"warmup_iters", 80},
                                   {"max_lr", 1e-3},
                                   {"validate_every", 50},
                                   {"val_pairs", 100},
                                   {"crop_frames", 51},
                                   {"select_by", "retrieval"}}},
                       {"stage2", {{"batch_size", 32},
                                   {"total_iters", 350},
                                   {"warmup_iters", 35},
                                   {"max_lr", 5e-4},
                                   {"validate_every", 25},
                                   {"val_pairs", 100},
                                   {"crop_frames", 51},
                                   {"select_by", "retrieval"}}}};
    cfg["finetune_retrieval"] = {{"epochs", 20},
                                 {"batch_size", 32},
                                 {"max_lr", 2e-4},
                                 {"validate_every", 0},
                                 {"crop_frames", 51}};
    cfg["classifier"] = {{"mode", "linear_probe"}, {"task", "single_label"}, {"steps", 300},
                         {"batch_size", 16},       {"lr", 1e-2},             {"crop_frames", 51}};
  }
  cfg["bootstrap"] = {{"beam_size", 3}, {"filter_mode", "strict"}};
  cfg["eval"] = {{"beam_size", 3}};
  return cfg;
}

namespace {

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;  // int/float interchangeable
  if (a.is_boolean() != b.is_boolean()) return false;
  return a.type() == b.type() || (a.is_null() || b.is_null());
}

}  // namespace

json merge_config(const json& defaults, const json& overrides, const std::string& path) {
  if (!overrides.is_object())
    throw ConfigError("config: expected an object at " + (path.empty() ? "$" : path));
  json out = defaults;
  for (auto it = overrides.begin(); it != overrides.end(); ++it) {
    const std::string child = path + "/" + it.key();
    if (!defaults.contains(it.key()))
      throw ConfigError("config: unknown key at " + child);
    const json& dv = defaults.at(it.key());
    if (dv.is_object()) {
      out[it.key()] = merge_config(dv, it.value(), child);
    } else {
      if (!same_kind(dv, it.value()))
        throw ConfigError("config: type mismatch at " + child + " (expected " +
                          std::string(dv.type_name()) + ", got " +
                          std::string(it.value().type_name()) + ")");
      out[it.key()] = it.value();
    }
  }
  return out;
}

void validate_config(const json& cfg) {
  auto require_pos = [&](const json& v, const std::string& path) {
    if (!v.is_number() || v.get<double>() <= 0)
      throw ConfigError("config: " + path + " must be positive");
  };
  auto require_nonneg = [&](const json& v, const std::string& path) {
    if (!v.is_number() || v.get<double>() < 0)
      throw ConfigError("config: " + path + " must be non-negative");
  };
  const auto& c = cfg.at("corpus");
  for (const char* k : {"n_train", "n_val", "n_test", "n_tag_only", "sample_rate"})
    require_pos(c.at(k), std::string("/corpus/") + k);
  for (const auto& stage : {"stage1", "stage2"}) {
    const auto& s = cfg.at("pretrain").at(stage);
    require_nonneg(s.at("total_iters"), std::string("/pretrain/") + stage + "/total_iters");
    require_nonneg(s.at("warmup_iters"), std::string("/pretrain/") + stage + "/warmup_iters");
    require_nonneg(s.at("max_lr"), std::string("/pretrain/") + stage + "/max_lr");
    require_pos(s.at("batch_size"), std::string("/pretrain/") + stage + "/batch_size");
  }
  require_nonneg(cfg.at("finetune_retrieval").at("epochs"), "/finetune_retrieval/epochs");
  require_pos(cfg.at("captioner_train").at("epochs"), "/captioner_train/epochs");
  require_pos(cfg.at("bootstrap").at("beam_size"), "/bootstrap/beam_size");
  const std::string fm = cfg.at("bootstrap").at("filter_mode").get<std::string>();
  if (fm != "strict" && fm != "any_known")
    throw ConfigError("config: /bootstrap/filter_mode must be strict|any_known");
}

json load_config(const std::string& path, const std::string& profile) {
  std::string effective_profile = profile;
  json user = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("load_config: cannot open " + path);
    try {
      in >> user;
    } catch (const json::exception& e) {
      throw ConfigError("load_config: " + path + " is not well-formed JSON: " + e.what());
    }
    if (user.contains("profile")) effective_profile = user.at("profile").get<std::string>();
  }
  json merged = merge_config(default_config(effective_profile), user);
  validate_config(merged);
  return merged;
}

audiofront::MelConfig mel_config_from(const json& cfg) {
  const auto& m = cfg.at("mel");
  audiofront::MelConfig mc;
  mc.sample_rate = m.at("sample_rate").get<int>();
  mc.win = m.at("win").get<int>();
  mc.hop = m.at("hop").get<int>();
  mc.n_fft = m.at("n_fft").get<int>();
  mc.mel_bins = m.at("mel_bins").get<int>();
  mc.fmin = m.at("fmin").get<double>();
  mc.fmax = m.at("fmax").get<double>();
  mc.floor_eps = m.at("floor_eps").get<double>();
  return mc;
}

toygen::CorpusConfig corpus_config_from(const json& cfg) {
  const auto& c = cfg.at("corpus");
  toygen::CorpusConfig cc;
  cc.n_train = c.at("n_train").get<std::size_t>();
  cc.n_val = c.at("n_val").get<std::size_t>();
  cc.n_test = c.at("n_test").get<std::size_t>();
  cc.n_tag_only = c.at("n_tag_only").get<std::size_t>();
  cc.tag_holdout = c.at("tag_holdout").get<std::vector<std::string>>();
  cc.sample_rate = c.at("sample_rate").get<int>();
  cc.clip_dur_min = c.at("clip_dur_min").get<double>();
  cc.clip_dur_max = c.at("clip_dur_max").get<double>();
  cc.p_one = c.at("p_one").get<double>();
  cc.p_two = c.at("p_two").get<double>();
  cc.p_three = c.at("p_three").get<double>();
  cc.tagonly_p_one = c.at("tagonly_p_one").get<double>();
  cc.tagonly_p_two = c.at("tagonly_p_two").get<double>();
  cc.tagonly_p_three = c.at("tagonly_p_three").get<double>();
  cc.unique_eval_captions = c.at("unique_eval_captions").get<bool>();
  return cc;
}

encoders::BiEncoderConfig biencoder_config_from(const json& cfg, std::size_t vocab_size,
                                                std::uint64_t mel_fingerprint) {
  const auto& b = cfg.at("biencoder");
  encoders::BiEncoderConfig bc;
  bc.conv_widths = b.at("conv_widths").get<std::vector<std::size_t>>();
  bc.mel_bins = cfg.at("mel").at("mel_bins").get<std::size_t>();
  bc.vocab_size = vocab_size;
  bc.text_width = b.at("text_width").get<std::size_t>();
  bc.text_layers = b.at("text_layers").get<std::size_t>();
  bc.text_heads = b.at("text_heads").get<std::size_t>();
  bc.text_ffn = b.at("text_ffn").get<std::size_t>();
  bc.max_text_len = b.at("max_text_len").get<std::size_t>();
  bc.embed_dim = b.at("embed_dim").get<std::size_t>();
  bc.init_temperature = b.at("init_temperature").get<double>();
  bc.temperature_floor = b.at("temperature_floor").get<double>();
  bc.bn_momentum = b.at("bn_momentum").get<double>();
  bc.mel_fingerprint = mel_fingerprint;
  return bc;
}

captioner::CaptionerConfig captioner_config_from(const json& cfg, std::size_t vocab_size,
                                                 std::vector<std::string> tag_vocab,
                                                 std::uint64_t mel_fingerprint) {
  const auto& c = cfg.at("captioner");
  captioner::CaptionerConfig cc;
  cc.feature_dim = cfg.at("mel").at("mel_bins").get<std::size_t>();
  cc.time_pool = c.at("time_pool").get<std::size_t>();
  cc.enc_hidden = c.at("enc_hidden").get<std::size_t>();
  cc.enc_layers = c.at("enc_layers").get<std::size_t>();
  cc.dec_width = c.at("dec_width").get<std::size_t>();
  cc.dec_layers = c.at("dec_layers").get<std::size_t>();
  cc.dec_heads = c.at("dec_heads").get<std::size_t>();
  cc.dec_ffn = c.at("dec_ffn").get<std::size_t>();
  cc.max_len = c.at("max_len").get<std::size_t>();
  cc.vocab_size = vocab_size;
  cc.tag_vocab = std::move(tag_vocab);
  cc.mel_fingerprint = mel_fingerprint;
  return cc;
}

captioner::CaptionTrainConfig captioner_train_config_from(const json& cfg, std::uint64_t seed) {
  const auto& c = cfg.at("captioner_train");
  captioner::CaptionTrainConfig tc;
  tc.epochs = c.at("epochs").get<std::size_t>();
  tc.batch_size = c.at("batch_size").get<std::size_t>();
  tc.peak_lr = c.at("peak_lr").get<double>();
  tc.end_lr = c.at("end_lr").get<double>();
  tc.warmup_frac = c.at("warmup_frac").get<double>();
  tc.crop_frames = c.at("crop_frames").get<std::size_t>();
  tc.random_crops = c.at("random_crops").get<bool>();
  tc.seed = seed;
  return tc;
}

contrastive::TrainConfig stage_config_from(const json& stage, std::uint64_t seed) {
  contrastive::TrainConfig tc;
  tc.batch_size = stage.at("batch_size").get<std::size_t>();
  tc.total_iters = stage.at("total_iters").get<std::size_t>();
  tc.warmup_iters = stage.at("warmup_iters").get<std::size_t>();
  tc.max_lr = stage.at("max_lr").get<double>();
  tc.validate_every = stage.at("validate_every").get<std::size_t>();
  tc.val_pairs = stage.at("val_pairs").get<std::size_t>();
  tc.crop_frames = stage.at("crop_frames").get<std::size_t>();
  tc.select_by = stage.at("select_by").get<std::string>();
  tc.seed = seed;
  return tc;
}

evalsuite::FinetuneRetrievalConfig finetune_config_from(const json& cfg, std::uint64_t seed) {
  const auto& f = cfg.at("finetune_retrieval");
  evalsuite::FinetuneRetrievalConfig fc;
  fc.epochs = f.at("epochs").get<std::size_t>();
  fc.batch_size = f.at("batch_size").get<std::size_t>();
  fc.max_lr = f.at("max_lr").get<double>();
  fc.validate_every = f.at("validate_every").get<std::size_t>();
  fc.crop_frames = f.at("crop_frames").get<std::size_t>();
  fc.seed = seed;
  return fc;
}

evalsuite::ClassifierConfig classifier_config_from(const json& cfg, std::size_t classes,
                                                   std::uint64_t seed) {
  const auto& c = cfg.at("classifier");
  evalsuite::ClassifierConfig cc;
  const std::string mode = c.at("mode").get<std::string>();
  if (mode == "linear_probe")
    cc.mode = evalsuite::ClassifierConfig::Mode::kLinearProbe;
  else if (mode == "finetune")
    cc.mode = evalsuite::ClassifierConfig::Mode::kFineTune;
  else
    throw ConfigError("config: /classifier/mode must be linear_probe|finetune");
  const std::string task = c.at("task").get<std::string>();
  if (task == "single_label")
    cc.task = evalsuite::ClassifierConfig::Task::kSingleLabel;
  else if (task == "multi_label")
    cc.task = evalsuite::ClassifierConfig::Task::kMultiLabel;
  else
    throw ConfigError("config: /classifier/task must be single_label|multi_label");
  cc.classes = classes;
  cc.steps = c.at("steps").get<std::size_t>();
  cc.batch_size = c.at("batch_size").get<std::size_t>();
  cc.lr = c.at("lr").get<double>();
  cc.crop_frames = c.at("crop_frames").get<std::size_t>();
  cc.seed = seed;
  return cc;
}

}  // namespace audiolab::cli
