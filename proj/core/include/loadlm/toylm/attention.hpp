// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "loadlm/toylm/tensor.hpp"

namespace loadlm::toylm {

// softmax(Q K^T / sqrt(d_k)) V for one head. With `causal`, position t only
// attends to positions <= t (queries and keys must then share length).
// `weights`, when given, receives the row-stochastic attention matrix.
// Throws kShapeMismatch on incompatible shapes.
Mat ScaledDotAttention(const Mat& q, const Mat& k, const Mat& v, bool causal,
                       Mat* weights = nullptr);

struct AttentionGrads {
  Mat dq;
  Mat dk;
  Mat dv;
};

AttentionGrads ScaledDotAttentionBackward(const Mat& q, const Mat& k,
                                          const Mat& v, bool causal,
                                          const Mat& dout);

// Per-head projections are stored side by side: head i owns columns
// [i*d_k, (i+1)*d_k) of wq/wk/wv and rows [i*d_k, (i+1)*d_k) of wo.
struct AttentionParams {
  std::size_t heads = 1;
  std::size_t d_model = 0;
  std::size_t d_k = 0;
  Mat wq;  // d_model x heads*d_k
  Mat wk;
  Mat wv;
  Mat wo;  // heads*d_k x d_model

  // Throws kShapeMismatch unless heads * d_k == d_model and shapes agree.
  void Validate() const;
  Mat HeadQuery(std::size_t i) const { return wq.middleCols(static_cast<Eigen::Index>(i * d_k), static_cast<Eigen::Index>(d_k)); }
  Mat HeadKey(std::size_t i) const { return wk.middleCols(static_cast<Eigen::Index>(i * d_k), static_cast<Eigen::Index>(d_k)); }
  Mat HeadValue(std::size_t i) const { return wv.middleCols(static_cast<Eigen::Index>(i * d_k), static_cast<Eigen::Index>(d_k)); }
};

// Runs every head on its column block of already-projected q/k/v and
// concatenates the head outputs.
Mat AttendHeads(const Mat& q, const Mat& k, const Mat& v, std::size_t heads,
                bool causal);
AttentionGrads AttendHeadsBackward(const Mat& q, const Mat& k, const Mat& v,
                                   std::size_t heads, bool causal,
                                   const Mat& dout);

// Concat(head_1..head_h) W^O with head_i = Attention(Q W_i^Q, K W_i^K, V W_i^V).
Mat MultiHead(const Mat& q_in, const Mat& k_in, const Mat& v_in,
              const AttentionParams& p, bool causal);

struct MultiHeadGrads {
  Mat dq_in;
  Mat dk_in;
  Mat dv_in;
  Mat dwq;
  Mat dwk;
  Mat dwv;
  Mat dwo;
};

MultiHeadGrads MultiHeadBackward(const Mat& q_in, const Mat& k_in,
                                 const Mat& v_in, const AttentionParams& p,
                                 bool causal, const Mat& dout);

}  // namespace loadlm::toylm
