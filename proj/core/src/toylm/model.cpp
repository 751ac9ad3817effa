// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "loadlm/toylm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

#include <fmt/format.h>

#include "loadlm/error.hpp"
#include "loadlm/toylm/attention.hpp"

namespace loadlm::toylm {
namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInitStd = 0.02;

Mat RandomNormal(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

double Gelu(double u) {
  const double c = std::sqrt(2.0 / std::numbers::pi);
  return 0.5 * u * (1.0 + std::tanh(c * (u + 0.044715 * u * u * u)));
}

double GeluGrad(double u) {
  const double c = std::sqrt(2.0 / std::numbers::pi);
  const double t = std::tanh(c * (u + 0.044715 * u * u * u));
  return 0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * c * (1.0 + 3.0 * 0.044715 * u * u);
}

// Row-wise log-softmax statistics for cross-entropy.
void SoftmaxRow(const Eigen::Ref<const RowVec>& logits, RowVec& probs) {
  const double m = logits.maxCoeff();
  probs = (logits.array() - m).exp().matrix();
  probs /= probs.sum();
}

}  // namespace

struct ToyLm::LinearCache {
  Mat x;
  Mat mask;  // dropout mask (already scaled), empty when inactive
  Mat xu;    // (x .* mask) * U
};

struct ToyLm::LayerNormCache {
  Mat xhat;
  Eigen::VectorXd rstd;
};

struct ToyLm::BlockCache {
  LayerNormCache ln1;
  LinearCache q, k, v, o;
  Mat qm, km, vm;
  LayerNormCache ln2;
  LinearCache fc1, fc2;
  Mat u1;
};

struct ToyLm::Trace {
  std::vector<BlockCache> blocks;
  LayerNormCache lnf;
  LinearCache head;
  std::size_t from = 0;
  std::size_t to = 0;
};

namespace {

Mat LayerNormForward(const Mat& x, const Mat& g, const Mat& b, Mat* xhat_out,
                     Eigen::VectorXd* rstd_out) {
  const auto n = static_cast<double>(x.cols());
  Mat xhat(x.rows(), x.cols());
  Eigen::VectorXd rstd(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).sum() / n;
    const double var = (x.row(i).array() - mean).square().sum() / n;
    rstd(i) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(i) = (x.row(i).array() - mean) * rstd(i);
  }
  Mat y = (xhat.array().rowwise() * g.row(0).array()).rowwise() + b.row(0).array();
  if (xhat_out != nullptr) *xhat_out = std::move(xhat);
  if (rstd_out != nullptr) *rstd_out = std::move(rstd);
  return y;
}

Mat LayerNormBackward(const Mat& dy, const Mat& g, const Mat& xhat,
                      const Eigen::VectorXd& rstd, Mat* dg, Mat* db) {
  if (dg != nullptr) dg->row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  if (db != nullptr) db->row(0) += dy.colwise().sum();
  const Mat dxhat = dy.array().rowwise() * g.row(0).array();
  const auto n = static_cast<double>(dy.cols());
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double m1 = dxhat.row(i).sum() / n;
    const double m2 = dxhat.row(i).dot(xhat.row(i)) / n;
    dx.row(i) = rstd(i) * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
  }
  return dx;
}

}  // namespace

void ToyLmConfig::Validate() const {
  if (d_model == 0 || heads == 0 || layers == 0 || ffn_mult == 0 ||
      context_len < 2 || d_model % heads != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("invalid toy LM shape d_model={} heads={} layers={} "
                            "context={}",
                            d_model, heads, layers, context_len));
  }
}

std::vector<int> TokenizeBytes(std::string_view text) {
  std::vector<int> out;
  out.reserve(text.size());
  for (unsigned char c : text) out.push_back(c);
  return out;
}

std::vector<int> TrainingSequence(std::string_view prompt, std::string_view target) {
  std::vector<int> seq;
  seq.reserve(prompt.size() + target.size() + 3);
  seq.push_back(kBos);
  for (unsigned char c : prompt) seq.push_back(c);
  seq.push_back(kSep);
  for (unsigned char c : target) seq.push_back(c);
  seq.push_back(kEos);
  return seq;
}

ToyLm::ToyLm(const ToyLmConfig& cfg) : cfg_(cfg) {
  cfg_.Validate();
  Rng rng(cfg_.seed);
  const auto d = static_cast<Eigen::Index>(cfg_.d_model);
  const auto f = static_cast<Eigen::Index>(cfg_.d_ffn());
  const double proj_std = kInitStd / std::sqrt(2.0 * static_cast<double>(cfg_.layers));

  Add("tok_emb", RandomNormal(kVocabSize, d, kInitStd, rng));
  Add("pos_emb", RandomNormal(static_cast<Eigen::Index>(cfg_.context_len), d, kInitStd, rng));
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    const std::string p = fmt::format("h{}.", l);
    Add(p + "ln1.g", Mat::Ones(1, d));
    Add(p + "ln1.b", Mat::Zero(1, d));
    Add(p + "attn.q.w", RandomNormal(d, d, kInitStd, rng));
    Add(p + "attn.k.w", RandomNormal(d, d, kInitStd, rng));
    Add(p + "attn.v.w", RandomNormal(d, d, kInitStd, rng));
    Add(p + "attn.o.w", RandomNormal(d, d, proj_std, rng));
    Add(p + "ln2.g", Mat::Ones(1, d));
    Add(p + "ln2.b", Mat::Zero(1, d));
    Add(p + "ffn.fc1.w", RandomNormal(d, f, kInitStd, rng));
    Add(p + "ffn.fc1.b", Mat::Zero(1, f));
    Add(p + "ffn.fc2.w", RandomNormal(f, d, proj_std, rng));
    Add(p + "ffn.fc2.b", Mat::Zero(1, d));
  }
  Add("lnf.g", Mat::Ones(1, d));
  Add("lnf.b", Mat::Zero(1, d));
  Add("head.w", RandomNormal(d, kVocabSize, kInitStd, rng));
  Add("head.b", Mat::Zero(1, kVocabSize));
  Rebuild();
}

int ToyLm::Add(std::string name, Mat value, bool trainable, bool adapter) {
  Parameter p;
  p.name = std::move(name);
  p.grad = Mat::Zero(value.rows(), value.cols());
  p.value = std::move(value);
  p.trainable = trainable;
  p.adapter = adapter;
  params_.push_back(std::move(p));
  return static_cast<int>(params_.size() - 1);
}

void ToyLm::Rebuild() {
  blocks_.assign(cfg_.layers, Block{});
  head_ = Linear{};
  auto index_of = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (params_[i].name == name) return static_cast<int>(i);
    }
    return -1;
  };
  auto require = [&](const std::string& name) {
    const int i = index_of(name);
    if (i < 0) {
      throw Error(ErrorCode::kSchemaError, fmt::format("missing parameter '{}'", name));
    }
    return i;
  };
  auto linear = [&](const std::string& prefix, bool bias) {
    Linear lin;
    lin.w = require(prefix + ".w");
    if (bias) lin.b = require(prefix + ".b");
    lin.u = index_of(prefix + ".lora_u");
    lin.v = index_of(prefix + ".lora_v");
    return lin;
  };
  tok_emb_ = require("tok_emb");
  pos_emb_ = require("pos_emb");
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    const std::string p = fmt::format("h{}.", l);
    Block& b = blocks_[l];
    b.ln1_g = require(p + "ln1.g");
    b.ln1_b = require(p + "ln1.b");
    b.q = linear(p + "attn.q", false);
    b.k = linear(p + "attn.k", false);
    b.v = linear(p + "attn.v", false);
    b.o = linear(p + "attn.o", false);
    b.ln2_g = require(p + "ln2.g");
    b.ln2_b = require(p + "ln2.b");
    b.fc1 = linear(p + "ffn.fc1", true);
    b.fc2 = linear(p + "ffn.fc2", true);
  }
  lnf_g_ = require("lnf.g");
  lnf_b_ = require("lnf.b");
  head_ = linear("head", true);
}

ToyLm::Linear* ToyLm::LinearByName(std::size_t layer, std::string_view proj) {
  return const_cast<Linear*>(std::as_const(*this).LinearByName(layer, proj));
}

const ToyLm::Linear* ToyLm::LinearByName(std::size_t layer,
                                         std::string_view proj) const {
  if (layer >= blocks_.size()) return nullptr;
  const Block& b = blocks_[layer];
  if (proj == "q") return &b.q;
  if (proj == "k") return &b.k;
  if (proj == "v") return &b.v;
  if (proj == "o") return &b.o;
  if (proj == "fc1") return &b.fc1;
  if (proj == "fc2") return &b.fc2;
  return nullptr;
}

void ToyLm::AttachLora(std::size_t rank, double alpha, double dropout,
                       std::uint64_t seed) {
  if (has_lora()) {
    throw Error(ErrorCode::kInvalidArgument, "adapters already attached");
  }
  if (rank == 0 || !(dropout >= 0.0 && dropout < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "LoRA rank must be >= 1 and dropout in [0, 1)");
  }
  Rng rng(seed);
  for (auto& p : params_) p.trainable = false;
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    for (std::string_view proj : {"q", "k", "v", "o", "fc1", "fc2"}) {
      const Linear* lin = LinearByName(l, proj);
      const Mat& w = params_[static_cast<std::size_t>(lin->w)].value;
      const auto limit = static_cast<std::size_t>(std::min(w.rows(), w.cols())) / 4;
      if (rank > limit) {
        throw Error(ErrorCode::kInvalidArgument,
                    fmt::format("LoRA rank {} exceeds min(d,k)/4 = {} for {}x{}",
                                rank, limit, w.rows(), w.cols()));
      }
    }
  }
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    for (std::string_view proj : {"q", "k", "v", "o", "fc1", "fc2"}) {
      const Linear* lin = LinearByName(l, proj);
      const std::string base = params_[static_cast<std::size_t>(lin->w)].name;
      const std::string prefix = base.substr(0, base.size() - 2);  // strip ".w"
      const Eigen::Index rows = params_[static_cast<std::size_t>(lin->w)].value.rows();
      const Eigen::Index cols = params_[static_cast<std::size_t>(lin->w)].value.cols();
      Add(prefix + ".lora_u",
          RandomNormal(rows, static_cast<Eigen::Index>(rank),
                       1.0 / std::sqrt(static_cast<double>(rows)), rng),
          true, true);
      Add(prefix + ".lora_v", Mat::Zero(static_cast<Eigen::Index>(rank), cols), true, true);
    }
  }
  lora_rank_ = rank;
  lora_scale_ = alpha / static_cast<double>(rank);
  lora_dropout_ = dropout;
  cfg_.mode = TrainMode::kLora;
  cfg_.lora_rank = rank;
  cfg_.lora_alpha = alpha;
  cfg_.lora_dropout = dropout;
  Rebuild();
}

Parameter* ToyLm::Find(std::string_view name) {
  for (auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

const Parameter* ToyLm::Find(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::size_t ToyLm::BaseParameterCount() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (!p.adapter) n += p.size();
  }
  return n;
}

std::size_t ToyLm::TrainableParameterCount() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.trainable) n += p.size();
  }
  return n;
}

double ToyLm::TrainableFraction() const {
  return static_cast<double>(TrainableParameterCount()) /
         static_cast<double>(BaseParameterCount());
}

void ToyLm::ZeroGrad() {
  for (auto& p : params_) p.grad.setZero();
}

Mat ToyLm::EffectiveWeight(std::size_t layer, std::string_view proj) const {
  const Linear* lin = LinearByName(layer, proj);
  if (lin == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("no projection '{}'", proj));
  }
  Mat w = params_[static_cast<std::size_t>(lin->w)].value;
  if (lin->u >= 0) {
    w += lora_scale_ * params_[static_cast<std::size_t>(lin->u)].value *
         params_[static_cast<std::size_t>(lin->v)].value;
  }
  return w;
}

Mat ToyLm::LinearForward(const Mat& x, const Linear& lin, Rng* rng,
                         LinearCache* cache) const {
  const Mat& w = params_[static_cast<std::size_t>(lin.w)].value;
  Mat y = x * w;
  if (lin.b >= 0) y.rowwise() += params_[static_cast<std::size_t>(lin.b)].value.row(0);
  Mat mask;
  Mat xu;
  if (lin.u >= 0) {
    const Mat& u = params_[static_cast<std::size_t>(lin.u)].value;
    const Mat& v = params_[static_cast<std::size_t>(lin.v)].value;
    if (rng != nullptr && lora_dropout_ > 0.0) {
      std::bernoulli_distribution keep(1.0 - lora_dropout_);
      mask.resize(x.rows(), x.cols());
      const double inv = 1.0 / (1.0 - lora_dropout_);
      for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*rng) ? inv : 0.0;
      xu = (x.array() * mask.array()).matrix() * u;
    } else {
      xu = x * u;
    }
    y.noalias() += lora_scale_ * (xu * v);
  }
  if (cache != nullptr) {
    cache->x = x;
    cache->mask = std::move(mask);
    cache->xu = std::move(xu);
  }
  return y;
}

Mat ToyLm::LinearBackward(const Mat& dy, const Linear& lin, const LinearCache& c) {
  Parameter& w = params_[static_cast<std::size_t>(lin.w)];
  if (w.trainable) w.grad.noalias() += c.x.transpose() * dy;
  if (lin.b >= 0) {
    Parameter& b = params_[static_cast<std::size_t>(lin.b)];
    if (b.trainable) b.grad.row(0) += dy.colwise().sum();
  }
  Mat dx = dy * w.value.transpose();
  if (lin.u >= 0) {
    Parameter& u = params_[static_cast<std::size_t>(lin.u)];
    Parameter& v = params_[static_cast<std::size_t>(lin.v)];
    if (v.trainable) v.grad.noalias() += lora_scale_ * (c.xu.transpose() * dy);
    const Mat dxu = lora_scale_ * (dy * v.value.transpose());
    if (c.mask.size() > 0) {
      const Mat xm = c.x.array() * c.mask.array();
      if (u.trainable) u.grad.noalias() += xm.transpose() * dxu;
      dx += ((dxu * u.value.transpose()).array() * c.mask.array()).matrix();
    } else {
      if (u.trainable) u.grad.noalias() += c.x.transpose() * dxu;
      dx.noalias() += dxu * u.value.transpose();
    }
  }
  return dx;
}

Mat ToyLm::RunForward(std::span<const int> tokens, std::size_t logits_from,
                      Rng* rng, Trace* trace) const {
  const std::size_t t_len = tokens.size();
  if (t_len == 0 || t_len > cfg_.context_len) {
    throw Error(ErrorCode::kContextOverflow,
                fmt::format("sequence of {} tokens, context is {}", t_len,
                            cfg_.context_len));
  }
  const std::size_t to = trace != nullptr && trace->to > 0 ? trace->to : t_len;
  const auto d = static_cast<Eigen::Index>(cfg_.d_model);
  const Mat& tok = params_[static_cast<std::size_t>(tok_emb_)].value;
  const Mat& pos = params_[static_cast<std::size_t>(pos_emb_)].value;
  Mat x(static_cast<Eigen::Index>(t_len), d);
  for (std::size_t t = 0; t < t_len; ++t) {
    const int id = tokens[t];
    if (id < 0 || id >= kVocabSize) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("token {} out of vocabulary", id));
    }
    x.row(static_cast<Eigen::Index>(t)) = tok.row(id) + pos.row(static_cast<Eigen::Index>(t));
  }
  if (trace != nullptr) trace->blocks.resize(blocks_.size());

  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const Block& b = blocks_[l];
    BlockCache* c = trace != nullptr ? &trace->blocks[l] : nullptr;
    const Mat a = LayerNormForward(x, params_[static_cast<std::size_t>(b.ln1_g)].value,
                                   params_[static_cast<std::size_t>(b.ln1_b)].value,
                                   c ? &c->ln1.xhat : nullptr, c ? &c->ln1.rstd : nullptr);
    Mat q = LinearForward(a, b.q, rng, c ? &c->q : nullptr);
    Mat k = LinearForward(a, b.k, rng, c ? &c->k : nullptr);
    Mat v = LinearForward(a, b.v, rng, c ? &c->v : nullptr);
    const Mat concat = AttendHeads(q, k, v, cfg_.heads, /*causal=*/true);
    x += LinearForward(concat, b.o, rng, c ? &c->o : nullptr);
    const Mat bn = LayerNormForward(x, params_[static_cast<std::size_t>(b.ln2_g)].value,
                                    params_[static_cast<std::size_t>(b.ln2_b)].value,
                                    c ? &c->ln2.xhat : nullptr, c ? &c->ln2.rstd : nullptr);
    Mat u1 = LinearForward(bn, b.fc1, rng, c ? &c->fc1 : nullptr);
    const Mat g = u1.unaryExpr([](double u) { return Gelu(u); });
    x += LinearForward(g, b.fc2, rng, c ? &c->fc2 : nullptr);
    if (c != nullptr) {
      c->qm = std::move(q);
      c->km = std::move(k);
      c->vm = std::move(v);
      c->u1 = std::move(u1);
    }
  }
  const auto rows = static_cast<Eigen::Index>(to - logits_from);
  const Mat tail = x.middleRows(static_cast<Eigen::Index>(logits_from), rows);
  const Mat z = LayerNormForward(tail, params_[static_cast<std::size_t>(lnf_g_)].value,
                                 params_[static_cast<std::size_t>(lnf_b_)].value,
                                 trace ? &trace->lnf.xhat : nullptr,
                                 trace ? &trace->lnf.rstd : nullptr);
  if (trace != nullptr) trace->from = logits_from;
  return LinearForward(z, head_, nullptr, trace ? &trace->head : nullptr);
}

Mat ToyLm::Forward(std::span<const int> tokens) const {
  return RunForward(tokens, 0, nullptr, nullptr);
}

SequenceStats ToyLm::Score(std::span<const int> tokens, std::size_t loss_from) const {
  if (tokens.size() < 2 || loss_from + 1 >= tokens.size()) {
    throw Error(ErrorCode::kInvalidArgument, "no target tokens to score");
  }
  Trace trace;
  trace.to = tokens.size() - 1;
  // Trace is used only to bound the logits range; caches are discarded.
  const Mat logits = RunForward(tokens, loss_from, nullptr, &trace);
  SequenceStats s;
  RowVec probs;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int next = tokens[loss_from + static_cast<std::size_t>(r) + 1];
    SoftmaxRow(logits.row(r), probs);
    s.loss_sum -= std::log(std::max(probs(next), 1e-300));
    Eigen::Index arg = 0;
    logits.row(r).maxCoeff(&arg);
    s.correct += arg == next ? 1 : 0;
    ++s.targets;
  }
  return s;
}

SequenceStats ToyLm::ForwardBackward(std::span<const int> tokens,
                                     std::size_t loss_from, double grad_scale,
                                     Rng* dropout_rng) {
  if (tokens.size() < 2 || loss_from + 1 >= tokens.size()) {
    throw Error(ErrorCode::kInvalidArgument, "no target tokens to train on");
  }
  Trace trace;
  trace.to = tokens.size() - 1;
  const Mat logits = RunForward(tokens, loss_from, dropout_rng, &trace);

  SequenceStats s;
  Mat dlogits(logits.rows(), logits.cols());
  RowVec probs;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int next = tokens[loss_from + static_cast<std::size_t>(r) + 1];
    SoftmaxRow(logits.row(r), probs);
    s.loss_sum -= std::log(std::max(probs(next), 1e-300));
    Eigen::Index arg = 0;
    logits.row(r).maxCoeff(&arg);
    s.correct += arg == next ? 1 : 0;
    ++s.targets;
    probs(next) -= 1.0;
    dlogits.row(r) = grad_scale * probs;
  }

  const Mat dz = LinearBackward(dlogits, head_, trace.head);
  Parameter& lnf_g = params_[static_cast<std::size_t>(lnf_g_)];
  Parameter& lnf_b = params_[static_cast<std::size_t>(lnf_b_)];
  const Mat dtail = LayerNormBackward(dz, lnf_g.value, trace.lnf.xhat, trace.lnf.rstd,
                                      lnf_g.trainable ? &lnf_g.grad : nullptr,
                                      lnf_b.trainable ? &lnf_b.grad : nullptr);
  const auto d = static_cast<Eigen::Index>(cfg_.d_model);
  Mat dx = Mat::Zero(static_cast<Eigen::Index>(tokens.size()), d);
  dx.middleRows(static_cast<Eigen::Index>(loss_from), dtail.rows()) = dtail;

  for (std::size_t li = blocks_.size(); li-- > 0;) {
    const Block& b = blocks_[li];
    const BlockCache& c = trace.blocks[li];
    // Feed-forward branch.
    Mat dg = LinearBackward(dx, b.fc2, c.fc2);
    for (Eigen::Index i = 0; i < dg.size(); ++i) dg.data()[i] *= GeluGrad(c.u1.data()[i]);
    const Mat dbn = LinearBackward(dg, b.fc1, c.fc1);
    Parameter& g2 = params_[static_cast<std::size_t>(b.ln2_g)];
    Parameter& b2 = params_[static_cast<std::size_t>(b.ln2_b)];
    dx += LayerNormBackward(dbn, g2.value, c.ln2.xhat, c.ln2.rstd,
                            g2.trainable ? &g2.grad : nullptr,
                            b2.trainable ? &b2.grad : nullptr);
    // Attention branch.
    const Mat dconcat = LinearBackward(dx, b.o, c.o);
    const auto ag = AttendHeadsBackward(c.qm, c.km, c.vm, cfg_.heads, true, dconcat);
    Mat da = LinearBackward(ag.dq, b.q, c.q);
    da += LinearBackward(ag.dk, b.k, c.k);
    da += LinearBackward(ag.dv, b.v, c.v);
    Parameter& g1 = params_[static_cast<std::size_t>(b.ln1_g)];
    Parameter& b1 = params_[static_cast<std::size_t>(b.ln1_b)];
    dx += LayerNormBackward(da, g1.value, c.ln1.xhat, c.ln1.rstd,
                            g1.trainable ? &g1.grad : nullptr,
                            b1.trainable ? &b1.grad : nullptr);
  }

  Parameter& tok = params_[static_cast<std::size_t>(tok_emb_)];
  Parameter& pos = params_[static_cast<std::size_t>(pos_emb_)];
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    if (tok.trainable) tok.grad.row(tokens[t]) += dx.row(row);
    if (pos.trainable) pos.grad.row(row) += dx.row(row);
  }
  return s;
}

IncrementalDecoder::IncrementalDecoder(const ToyLm& model) : model_(model) {
  const auto& p = model.params_;
  auto val = [&](int i) -> const Mat& { return p[static_cast<std::size_t>(i)].value; };
  const auto d = static_cast<Eigen::Index>(model.cfg_.d_model);
  for (std::size_t l = 0; l < model.blocks_.size(); ++l) {
    const auto& b = model.blocks_[l];
    LayerWeights w;
    w.ln1_g = val(b.ln1_g);
    w.ln1_b = val(b.ln1_b);
    w.ln2_g = val(b.ln2_g);
    w.ln2_b = val(b.ln2_b);
    w.wq = model.EffectiveWeight(l, "q");
    w.wk = model.EffectiveWeight(l, "k");
    w.wv = model.EffectiveWeight(l, "v");
    w.wo = model.EffectiveWeight(l, "o");
    w.w1 = model.EffectiveWeight(l, "fc1");
    w.w2 = model.EffectiveWeight(l, "fc2");
    w.b1 = val(b.fc1.b);
    w.b2 = val(b.fc2.b);
    w.k_cache = Mat::Zero(static_cast<Eigen::Index>(model.cfg_.context_len), d);
    w.v_cache = Mat::Zero(static_cast<Eigen::Index>(model.cfg_.context_len), d);
    layers_.push_back(std::move(w));
  }
  lnf_g_ = val(model.lnf_g_);
  lnf_b_ = val(model.lnf_b_);
  head_w_ = val(model.head_.w);
  head_b_ = val(model.head_.b);
}

RowVec IncrementalDecoder::Step(int token) {
  const auto& cfg = model_.cfg_;
  if (pos_ >= cfg.context_len) {
    throw Error(ErrorCode::kPromptTooLong,
                fmt::format("context of {} tokens is full", cfg.context_len));
  }
  if (token < 0 || token >= kVocabSize) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("token {} out of vocabulary", token));
  }
  const auto t = static_cast<Eigen::Index>(pos_);
  Mat x = model_.params_[static_cast<std::size_t>(model_.tok_emb_)].value.row(token) +
          model_.params_[static_cast<std::size_t>(model_.pos_emb_)].value.row(t);
  const auto heads = static_cast<Eigen::Index>(cfg.heads);
  const auto dk = static_cast<Eigen::Index>(cfg.d_k());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  for (auto& w : layers_) {
    const Mat a = LayerNormForward(x, w.ln1_g, w.ln1_b, nullptr, nullptr);
    const RowVec q = a * w.wq;
    w.k_cache.row(t) = a * w.wk;
    w.v_cache.row(t) = a * w.wv;
    RowVec concat(heads * dk);
    for (Eigen::Index h = 0; h < heads; ++h) {
      const auto keys = w.k_cache.block(0, h * dk, t + 1, dk);
      RowVec s = (keys * q.segment(h * dk, dk).transpose()).transpose() * scale;
      s = (s.array() - s.maxCoeff()).exp().matrix();
      s /= s.sum();
      concat.segment(h * dk, dk) = s * w.v_cache.block(0, h * dk, t + 1, dk);
    }
    x += concat * w.wo;
    const Mat bn = LayerNormForward(x, w.ln2_g, w.ln2_b, nullptr, nullptr);
    Mat u1 = bn * w.w1;
    u1.row(0) += w.b1;
    const Mat g = u1.unaryExpr([](double u) { return Gelu(u); });
    x += g * w.w2;
    x.row(0) += w.b2;
  }
  const Mat z = LayerNormForward(x, lnf_g_, lnf_b_, nullptr, nullptr);
  ++pos_;
  return z * head_w_ + head_b_;
}

}  // namespace loadlm::toylm
