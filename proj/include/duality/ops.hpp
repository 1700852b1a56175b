#pragma once

#include <vector>

#include "duality/tensor.hpp"

// Differentiable operations. Each builds the output values through the
// kernel layer and records a backward rule on the tape. Inputs that do not
// require grad are skipped during accumulation.

namespace duality::ops {

enum class Activation { sigmoid, tanh, softmax, log_softmax };

// Standard matrix product a[m x k] * b[k x n].
TensorPtr matmul(Tape& tape, const TensorPtr& a, const TensorPtr& b);

// x[b x in] * W[out x in]^T + bias[out].
TensorPtr linear(Tape& tape, const TensorPtr& x, const TensorPtr& W,
                 const TensorPtr& bias);

// x[b x in] * (W .* mask)[out x in]^T + bias[out]. The mask is a plain 0/1
// tensor; masked weights receive exactly zero gradient.
TensorPtr masked_linear(Tape& tape, const TensorPtr& x, const TensorPtr& W,
                        const TensorPtr& mask, const TensorPtr& bias);

// Elementwise or row-normalized activation. axis must be 1 (rows) for the
// softmax variants and is ignored otherwise.
TensorPtr apply_activation(Tape& tape, Activation kind, const TensorPtr& x,
                           int axis = 1);

TensorPtr sigmoid(Tape& tape, const TensorPtr& x);
TensorPtr tanh_act(Tape& tape, const TensorPtr& x);
TensorPtr softmax_rows(Tape& tape, const TensorPtr& x);
TensorPtr log_softmax_rows(Tape& tape, const TensorPtr& x);

TensorPtr add(Tape& tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(Tape& tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(Tape& tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr square(Tape& tape, const TensorPtr& x);
TensorPtr scale(Tape& tape, const TensorPtr& x, double c);

// Row gather from an embedding table; ids out of range throw.
TensorPtr embedding_lookup(Tape& tape, const TensorPtr& table,
                           const std::vector<int>& ids);

// out[i] = x[i, idx[i]]
TensorPtr pick_per_row(Tape& tape, const TensorPtr& x,
                       const std::vector<int>& idx);

// Rowwise select: out_i = m[i] * a_i + (1 - m[i]) * b_i. Used to freeze the
// recurrent state of finished sequences in a padded batch.
TensorPtr lerp_rows(Tape& tape, const TensorPtr& a, const TensorPtr& b,
                    const std::vector<double>& row_mask);

TensorPtr sum(Tape& tape, const TensorPtr& x);
TensorPtr mean(Tape& tape, const TensorPtr& x);

// Per-row factorized Bernoulli log-likelihood from logits.
// out[i] = sum_d [ t_id * log sig(a_id) + (1 - t_id) * log(1 - sig(a_id)) ]
// computed via stable softplus, with each log term floored at log(1e-12).
TensorPtr bernoulli_loglik(Tape& tape, const TensorPtr& logits,
                           const TensorPtr& targets);

double softplus(double t);

inline constexpr double kLogProbFloor = -27.631021115928547;  // log(1e-12)

}  // namespace duality::ops
