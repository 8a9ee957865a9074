// SPDX-License-Identifier: Apache-2.0

#include "audiolab/contrastive/contrastive.hpp"

#include <cmath>
#include <fstream>

namespace audiolab::contrastive {

using namespace audiolab::diff;

Tensor l2_normalize_rows(const Tensor& x) {
  const std::size_t r = x.dim(0);
  Tensor sq = row_sum(mul(x, x));
  for (std::size_t i = 0; i < r; ++i)
    if (sq.data()[i] <= 0.0)
      throw NumericError("l2_normalize_rows: zero-norm embedding at row " + std::to_string(i));
  return div_rows(x, sqrt_act(sq));
}

Tensor similarity_matrix(const Tensor& audio, const Tensor& text) {
  if (audio.shape().size() != 2 || text.shape().size() != 2)
    throw ShapeError("similarity_matrix: embeddings must be matrices");
  if (audio.dim(0) != text.dim(0))
    throw ShapeError("similarity_matrix: audio count " + std::to_string(audio.dim(0)) +
                     " != text count " + std::to_string(text.dim(0)));
  if (audio.dim(1) != text.dim(1))
    throw ShapeError("similarity_matrix: embedding dims differ, " + shape_str(audio.shape()) +
                     " vs " + shape_str(text.shape()));
  return matmul(l2_normalize_rows(audio), transpose2d(l2_normalize_rows(text)));
}

std::vector<double> cosine_scores(const std::vector<std::vector<double>>& rows,
                                  const std::vector<std::vector<double>>& cols) {
  std::vector<double> out(rows.size() * cols.size(), 0.0);
  auto norm = [](const std::vector<double>& v, std::size_t idx, const char* side) {
    double s = 0.0;
    for (double x : v) s += x * x;
    if (s <= 0.0)
      throw NumericError(std::string("cosine_scores: zero-norm ") + side + " embedding at row " +
                         std::to_string(idx));
    return std::sqrt(s);
  };
  std::vector<double> rn(rows.size()), cn(cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rn[i] = norm(rows[i], i, "audio");
  for (std::size_t j = 0; j < cols.size(); ++j) cn[j] = norm(cols[j], j, "text");
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < rows[i].size(); ++k) dot += rows[i][k] * cols[j][k];
      out[i * cols.size() + j] = dot / (rn[i] * cn[j]);
    }
  return out;
}

namespace {

InfonceParts infonce_from_logits(const Tensor& logits) {
  const std::size_t n = logits.dim(0);
  InfonceParts parts;
  parts.a2t = neg(gather_diag(log_softmax_rows(logits)));
  parts.t2a = neg(gather_diag(log_softmax_rows(transpose2d(logits))));
  parts.loss = scale(add(sum_all(parts.a2t), sum_all(parts.t2a)), 1.0 / static_cast<double>(n));
  return parts;
}

void check_square(const Tensor& s) {
  if (s.shape().size() != 2 || s.dim(0) != s.dim(1))
    throw ShapeError("infonce_loss: similarity matrix must be square, got " +
                     shape_str(s.shape()));
  if (s.dim(0) < 2) throw ConfigError("infonce_loss: need N >= 2 for in-batch negatives");
  for (double v : s.data())
    if (!std::isfinite(v)) throw NumericError("infonce_loss: non-finite similarity value");
}

}  // namespace

InfonceParts infonce_loss(const Tensor& similarity, double tau) {
  check_square(similarity);
  if (tau <= 0.0) throw ConfigError("infonce_loss: temperature must be positive");
  return infonce_from_logits(scale(similarity, 1.0 / tau));
}

InfonceParts infonce_loss_logtemp(const Tensor& similarity, const Tensor& log_temperature) {
  check_square(similarity);
  Tensor inv_tau = exp_act(neg(log_temperature));
  return infonce_from_logits(mul_scalar_tensor(similarity, inv_tau));
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("TrainConfig: batch_size must be >= 2 for InfoNCE");
  if (warmup_iters > total_iters)
    throw ConfigError("TrainConfig: warmup_iters exceeds total_iters");
  if (max_lr < 0) throw ConfigError("TrainConfig: negative max_lr");
  if (validate_every == 0) throw ConfigError("TrainConfig: validate_every must be positive");
}

double lr_schedule(std::size_t iter, const TrainConfig& cfg) {
  cfg.validate();
  if (iter > cfg.total_iters)
    throw ConfigError("lr_schedule: iteration " + std::to_string(iter) + " beyond total " +
                      std::to_string(cfg.total_iters));
  if (cfg.warmup_iters > 0 && iter < cfg.warmup_iters)
    return cfg.max_lr * static_cast<double>(iter) / static_cast<double>(cfg.warmup_iters);
  if (cfg.total_iters == cfg.warmup_iters) return cfg.max_lr;
  const double progress = static_cast<double>(iter - cfg.warmup_iters) /
                          static_cast<double>(cfg.total_iters - cfg.warmup_iters);
  return cfg.max_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

// ---- checkpoint persistence ----

namespace {
constexpr char kMagic[4] = {'A', 'L', 'C', 'K'};
}

void save_checkpoint(const std::string& path, const diff::ParamStore& params,
                     const CheckpointMeta& meta) {
  nlohmann::json manifest;
  manifest["stage"] = meta.stage;
  manifest["config_fingerprint"] = meta.config_fingerprint;
  manifest["config"] = meta.config;
  manifest["dtype"] = "f64";
  nlohmann::json plist = nlohmann::json::array();
  auto describe = [&](const diff::Parameter& p, bool trainable) {
    plist.push_back({{"name", p.name}, {"shape", p.tensor.shape()}, {"trainable", trainable}});
  };
  for (const auto& p : params.params()) describe(p, true);
  for (const auto& b : params.buffers()) describe(b, false);
  manifest["params"] = plist;
  const std::string header = manifest.dump();

  std::ofstream of(path, std::ios::binary);
  if (!of) throw ParseError("save_checkpoint: cannot open " + path + " for writing");
  of.write(kMagic, 4);
  const std::uint32_t version = 1;
  const std::uint64_t hlen = header.size();
  of.write(reinterpret_cast<const char*>(&version), 4);
  of.write(reinterpret_cast<const char*>(&hlen), 8);
  of.write(header.data(), static_cast<std::streamsize>(header.size()));
  auto dump = [&](const diff::Parameter& p) {
    of.write(reinterpret_cast<const char*>(p.tensor.data().data()),
             static_cast<std::streamsize>(p.tensor.numel() * sizeof(double)));
  };
  for (const auto& p : params.params()) dump(p);
  for (const auto& b : params.buffers()) dump(b);
}

namespace {

struct ParsedCheckpoint {
  CheckpointMeta meta;
  nlohmann::json plist;
  std::string payload;
};

ParsedCheckpoint parse_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("checkpoint: cannot open " + path);
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t hlen = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&hlen), 8);
  if (!in || std::memcmp(magic, kMagic, 4) != 0 || version != 1)
    throw ParseError("checkpoint: bad header in " + path);
  std::string header(hlen, '\0');
  in.read(header.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw ParseError("checkpoint: truncated manifest in " + path);
  ParsedCheckpoint pc;
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint: corrupt manifest in " + path + ": " + e.what());
  }
  pc.meta.stage = manifest.value("stage", std::string());
  pc.meta.config_fingerprint = manifest.value("config_fingerprint", std::uint64_t(0));
  pc.meta.config = manifest.value("config", nlohmann::json::object());
  pc.plist = manifest.at("params");
  pc.payload.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return pc;
}

}  // namespace

CheckpointMeta read_checkpoint_meta(const std::string& path) {
  return parse_checkpoint(path).meta;
}

CheckpointMeta load_checkpoint(const std::string& path, diff::ParamStore& params) {
  ParsedCheckpoint pc = parse_checkpoint(path);

  // order both sides by manifest order; validate the full set before mutating
  std::vector<diff::Parameter*> targets;
  for (auto& p : params.params()) targets.push_back(&p);
  for (auto& b : params.buffers()) targets.push_back(&b);

  std::vector<std::string> problems;
  if (pc.plist.size() != targets.size())
    problems.push_back("parameter count " + std::to_string(pc.plist.size()) + " in file vs " +
                       std::to_string(targets.size()) + " in model");
  std::size_t total_values = 0;
  const std::size_t n = std::min<std::size_t>(pc.plist.size(), targets.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::string name = pc.plist[i].at("name").get<std::string>();
    const auto shape = pc.plist[i].at("shape").get<std::vector<std::size_t>>();
    if (name != targets[i]->name)
      problems.push_back("entry " + std::to_string(i) + ": file has '" + name +
                         "', model has '" + targets[i]->name + "'");
    else if (shape != targets[i]->tensor.shape())
      problems.push_back("parameter " + name + ": shape " + diff::shape_str(shape) +
                         " in file vs " + diff::shape_str(targets[i]->tensor.shape()));
    total_values += diff::shape_numel(shape);
  }
  for (std::size_t i = n; i < pc.plist.size(); ++i)
    problems.push_back("extra parameter in file: " +
                       pc.plist[i].at("name").get<std::string>());
  for (std::size_t i = n; i < targets.size(); ++i)
    problems.push_back("missing parameter: " + targets[i]->name);
  if (!problems.empty()) {
    std::string msg = "load_checkpoint: " + path + " does not match the model:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw CheckpointError(msg);
  }
  if (pc.payload.size() != total_values * sizeof(double))
    throw ParseError("load_checkpoint: truncated payload in " + path + " (" +
                     std::to_string(pc.payload.size()) + " bytes, expected " +
                     std::to_string(total_values * sizeof(double)) + ")");

  const char* src = pc.payload.data();
  for (auto* t : targets) {
    std::memcpy(t->tensor.raw().data(), src, t->tensor.numel() * sizeof(double));
    src += t->tensor.numel() * sizeof(double);
  }
  return pc.meta;
}

std::vector<diff::NamedGradCheck> infonce_gradient_checks(std::uint64_t seed) {
  std::vector<diff::NamedGradCheck> checks;
  Rng master(seed);
  const std::size_t ns[3] = {2, 4, 6};
  for (int s = 0; s < 3; ++s) {
    Rng rng = master.fork(static_cast<std::uint64_t>(s));
    const std::size_t n = ns[s], d = 5;
    Tensor a = Tensor::zeros({n, d}, true);
    Tensor t = Tensor::zeros({n, d}, true);
    for (auto& v : a.raw()) v = 2.0 * rng.uniform() - 1.0;
    for (auto& v : t.raw()) v = 2.0 * rng.uniform() - 1.0;
    const double tau = 0.2 + 0.6 * rng.uniform();
    checks.push_back({"infonce-embeddings/" + std::to_string(s),
                      [a, t, tau](double eps, double tol) {
                        auto f = [tau](const std::vector<Tensor>& v) {
                          return infonce_loss(similarity_matrix(v[0], v[1]), tau).loss;
                        };
                        return diff::gradient_check(f, {a, t}, eps, tol, {"audio", "text"});
                      }});
    Tensor sim = Tensor::zeros({n, n}, true);
    for (auto& v : sim.raw()) v = 2.0 * rng.uniform() - 1.0;
    checks.push_back({"infonce-similarity/" + std::to_string(s),
                      [sim, tau](double eps, double tol) {
                        auto f = [tau](const std::vector<Tensor>& v) {
                          return infonce_loss(v[0], tau).loss;
                        };
                        return diff::gradient_check(f, {sim}, eps, tol, {"similarity"});
                      }});
  }
  return checks;
}

std::uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("file_hash: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a64(bytes.data(), bytes.size());
}

}  // namespace audiolab::contrastive
