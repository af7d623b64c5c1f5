#pragma once

// Differentiable primitives. Each function evaluates its forward value
// immediately, records it on the tape and registers the exact backward rule.
// Shape mismatches throw ShapeError naming the offending shapes.

#include <span>
#include <vector>

#include "nfship/ad/tape.hpp"
#include "nfship/fuzzy.hpp"

namespace nfship::ad {

// x [B, in], weight [out, in], bias [out] (bias may be an invalid Var).
template <typename T>
Var dense(Tape<T>& tape, Var x, Var weight, Var bias);

// Stride-1 2-D convolution. x [B, C, H, W], weight [O, C, k, k], bias [O].
template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var weight, Var bias, std::size_t padding);

// Per-feature batch normalisation over x [B, F]. Training mode normalises with
// batch statistics and updates the running buffers; eval mode uses only the
// running buffers.
template <typename T>
Var batch_norm(Tape<T>& tape, Var x, Var gamma, Var beta, Param<T>& running_mean,
               Param<T>& running_var, const Mode& mode, T momentum = T(0.1), T eps = T(1e-5));

// Inverted dropout: kept units are scaled by 1 / (1 - rate). Identity outside
// training or when mode.dropout is off.
template <typename T>
Var dropout(Tape<T>& tape, Var x, T rate, const Mode& mode);

template <typename T>
Var relu(Tape<T>& tape, Var x);

template <typename T>
Var leaky_relu(Tape<T>& tape, Var x, T negative_slope = T(0.01));

template <typename T>
Var softplus(Tape<T>& tape, Var x);

// [B, ...] -> [B, prod(...)]
template <typename T>
Var flatten(Tape<T>& tape, Var x);

// y[b, o] = x1[b]^T W[o] x2[b] + bias[o]; weight [O, n1, n2].
template <typename T>
Var bilinear(Tape<T>& tape, Var x1, Var x2, Var weight, Var bias);

// Row-wise softmax over x [B, m].
template <typename T>
Var softmax(Tape<T>& tape, Var x);

// Mean over the batch of -log softmax(logits[b])[labels[b]]; scalar output.
template <typename T>
Var softmax_cross_entropy(Tape<T>& tape, Var logits, std::span<const int> labels);

template <typename T>
Var exp(Tape<T>& tape, Var x);

// Natural log; inputs must be positive.
template <typename T>
Var log(Tape<T>& tape, Var x);

template <typename T>
Var scale(Tape<T>& tape, Var x, T factor);

// sum_i coeffs[i] * x[i]; scalar output. Used to reduce outputs to a loss.
template <typename T>
Var dot(Tape<T>& tape, Var x, const Tensor<T>& coeffs);

// Condition degrees of a rule layout. ais [B, F]; slopes [B, K] (per sample)
// or [K] (shared), K = comparison count. Each comparison gets the sigmoid
// membership with its slope; each condition is the weighted-exponential-mean
// conjunction (andness r_and < 0) of its comparisons. Output [B, conditions];
// a condition without comparisons has degree 1.
template <typename T>
Var fuzzy_conditions(Tape<T>& tape, Var ais, Var slopes, const fuzzy::RuleLayout& layout,
                     T r_and);

// Simplex-weighted sums over segments: weights are the per-segment softmax of
// `logits` [N]; out[b, s] = sum_{j in segment s} w_j values[b, j]. values
// [B, N]. An empty segment yields the constant 1.
template <typename T>
Var simplex_segment_sum(Tape<T>& tape, Var values, Var logits,
                        std::span<const fuzzy::RuleLayout::Range> segments);

// Per-segment softmax of logits (the effective simplex weights).
template <typename T>
std::vector<T> segment_softmax(std::span<const T> logits,
                               std::span<const fuzzy::RuleLayout::Range> segments);

struct CrossEntropyResult {
  double loss = 0.0;
  std::vector<double> gradient;  // softmax(logits) - y
};

// Loss and logit gradient for one sample against a one-hot target.
CrossEntropyResult softmax_cross_entropy(std::span<const double> logits,
                                         std::span<const double> one_hot);

}  // namespace nfship::ad
