// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "loadlm/toylm/attention.hpp"

#include <cmath>

#include <fmt/format.h>

#include "loadlm/error.hpp"

namespace loadlm::toylm {
namespace {

void CheckShapes(const Mat& q, const Mat& k, const Mat& v, bool causal) {
  if (q.cols() != k.cols() || k.rows() != v.rows() || q.cols() == 0 ||
      k.rows() == 0 || (causal && q.rows() != k.rows())) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("attention shapes q {}x{}, k {}x{}, v {}x{}",
                            q.rows(), q.cols(), k.rows(), k.cols(), v.rows(),
                            v.cols()));
  }
}

Mat AttentionWeights(const Mat& q, const Mat& k, bool causal) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Mat s = (q * k.transpose()) * scale;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const Eigen::Index visible = causal ? i + 1 : s.cols();
    const double m = s.row(i).head(visible).maxCoeff();
    double z = 0.0;
    for (Eigen::Index j = 0; j < visible; ++j) {
      s(i, j) = std::exp(s(i, j) - m);
      z += s(i, j);
    }
    s.row(i).head(visible) /= z;
    s.row(i).tail(s.cols() - visible).setZero();
  }
  return s;
}

}  // namespace

Mat ScaledDotAttention(const Mat& q, const Mat& k, const Mat& v, bool causal,
                       Mat* weights) {
  CheckShapes(q, k, v, causal);
  Mat p = AttentionWeights(q, k, causal);
  Mat out = p * v;
  if (weights != nullptr) *weights = std::move(p);
  return out;
}

AttentionGrads ScaledDotAttentionBackward(const Mat& q, const Mat& k,
                                          const Mat& v, bool causal,
                                          const Mat& dout) {
  CheckShapes(q, k, v, causal);
  const Mat p = AttentionWeights(q, k, causal);
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  AttentionGrads g;
  g.dv = p.transpose() * dout;
  Mat dp = dout * v.transpose();
  // Softmax Jacobian row by row; masked entries have p == 0.
  for (Eigen::Index i = 0; i < dp.rows(); ++i) {
    const double dot = dp.row(i).dot(p.row(i));
    dp.row(i) = (p.row(i).array() * (dp.row(i).array() - dot)).matrix();
  }
  g.dq = dp * k * scale;
  g.dk = dp.transpose() * q * scale;
  return g;
}

void AttentionParams::Validate() const {
  const auto d = static_cast<Eigen::Index>(d_model);
  const auto hd = static_cast<Eigen::Index>(heads * d_k);
  if (heads == 0 || heads * d_k != d_model || wq.rows() != d || wq.cols() != hd ||
      wk.rows() != d || wk.cols() != hd || wv.rows() != d || wv.cols() != hd ||
      wo.rows() != hd || wo.cols() != d) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("attention params: h={} d_k={} d_model={}", heads,
                            d_k, d_model));
  }
}

Mat AttendHeads(const Mat& q, const Mat& k, const Mat& v, std::size_t heads,
                bool causal) {
  const auto dk = q.cols() / static_cast<Eigen::Index>(heads);
  Mat out(q.rows(), dk * static_cast<Eigen::Index>(heads));
  for (std::size_t h = 0; h < heads; ++h) {
    const auto c = static_cast<Eigen::Index>(h) * dk;
    out.middleCols(c, dk) = ScaledDotAttention(q.middleCols(c, dk), k.middleCols(c, dk),
                                               v.middleCols(c, dk), causal);
  }
  return out;
}

AttentionGrads AttendHeadsBackward(const Mat& q, const Mat& k, const Mat& v,
                                   std::size_t heads, bool causal,
                                   const Mat& dout) {
  const auto dk = q.cols() / static_cast<Eigen::Index>(heads);
  AttentionGrads g{Mat(q.rows(), q.cols()), Mat(k.rows(), k.cols()),
                   Mat(v.rows(), v.cols())};
  for (std::size_t h = 0; h < heads; ++h) {
    const auto c = static_cast<Eigen::Index>(h) * dk;
    auto gh = ScaledDotAttentionBackward(q.middleCols(c, dk), k.middleCols(c, dk),
                                         v.middleCols(c, dk), causal,
                                         dout.middleCols(c, dk));
    g.dq.middleCols(c, dk) = gh.dq;
    g.dk.middleCols(c, dk) = gh.dk;
    g.dv.middleCols(c, dk) = gh.dv;
  }
  return g;
}

Mat MultiHead(const Mat& q_in, const Mat& k_in, const Mat& v_in,
              const AttentionParams& p, bool causal) {
  p.Validate();
  if (q_in.cols() != p.wq.rows() || k_in.cols() != p.wk.rows() ||
      v_in.cols() != p.wv.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "multi-head input width != d_model");
  }
  const Mat concat = AttendHeads(q_in * p.wq, k_in * p.wk, v_in * p.wv, p.heads, causal);
  return concat * p.wo;
}

MultiHeadGrads MultiHeadBackward(const Mat& q_in, const Mat& k_in,
                                 const Mat& v_in, const AttentionParams& p,
                                 bool causal, const Mat& dout) {
  p.Validate();
  const Mat q = q_in * p.wq;
  const Mat k = k_in * p.wk;
  const Mat v = v_in * p.wv;
  const Mat concat = AttendHeads(q, k, v, p.heads, causal);
  MultiHeadGrads g;
  g.dwo = concat.transpose() * dout;
  const Mat dconcat = dout * p.wo.transpose();
  const auto ag = AttendHeadsBackward(q, k, v, p.heads, causal, dconcat);
  g.dwq = q_in.transpose() * ag.dq;
  g.dwk = k_in.transpose() * ag.dk;
  g.dwv = v_in.transpose() * ag.dv;
  g.dq_in = ag.dq * p.wq.transpose();
  g.dk_in = ag.dk * p.wk.transpose();
  g.dv_in = ag.dv * p.wv.transpose();
  return g;
}

}  // namespace loadlm::toylm
