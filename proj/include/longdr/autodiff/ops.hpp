#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "longdr/autodiff/tape.hpp"

namespace longdr::ad {

enum class UnaryKind { sigmoid, tanh, relu, log, exp, clip01, square, softplus };

const char* to_string(UnaryKind kind);

// [m,k] x [k,n] -> [m,n]. Throws DimensionError on mismatch.
Var matmul(Var a, Var b);

// Elementwise on identical shapes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);

Var scale(Var x, double c);
Var add_scalar(Var x, double c);

// x[r,c] + bias[c] for every row. bias may be [c] or [1,c].
Var add_bias(Var x, Var bias);

// x W + b
Var linear(Var x, Var weight, Var bias);

// Elementwise map. log throws DomainError on non-positive input. clip01 has
// unit gradient strictly inside (0,1) and zero gradient outside.
Var unary(UnaryKind kind, Var x);
inline Var sigmoid(Var x) { return unary(UnaryKind::sigmoid, x); }
inline Var tanh(Var x) { return unary(UnaryKind::tanh, x); }
inline Var relu(Var x) { return unary(UnaryKind::relu, x); }
inline Var log(Var x) { return unary(UnaryKind::log, x); }
inline Var exp(Var x) { return unary(UnaryKind::exp, x); }
inline Var clip01(Var x) { return unary(UnaryKind::clip01, x); }
inline Var square(Var x) { return unary(UnaryKind::square, x); }
inline Var softplus(Var x) { return unary(UnaryKind::softplus, x); }

// Reductions to a rank-0 tensor.
Var sum(Var x);
Var mean(Var x);

// Row-wise layer normalisation with affine gamma/beta of shape [c].
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);

// Multi-head causal self-attention over batch independent sequences of
// length seq. q, k, v: [batch*seq, hidden].
Var causal_attention(Var q, Var k, Var v, std::size_t batch, std::size_t seq, std::size_t heads);

// Forward-only counterpart of kernels::prefix_attention_forward. Throws
// ContractError if any input requires grad.
Var prefix_attention(Var q_branch, Var k_branch, Var v_branch, Var keys_prefix,
                     Var values_prefix, std::size_t seq, std::size_t heads,
                     std::size_t rows_per_unit, std::span<const std::size_t> positions);

// Inverted dropout. p == 0 returns x unchanged.
Var dropout(Var x, double p, std::mt19937_64& rng);

// out row i = x row indices[i]. Backward scatters and adds.
Var gather_rows(Var x, std::vector<std::size_t> indices);
Var concat_rows(Var a, Var b);
Var slice_cols(Var x, std::size_t begin, std::size_t end);

// softplus(z) - y*z, elementwise: binary cross-entropy of sigmoid(z) vs y.
Var bce_with_logits(Var logits, Var targets);

} // namespace longdr::ad
