#include "longdr/autodiff/ops.hpp"

#include <cmath>
#include <memory>
#include <string>

#include "longdr/common/errors.hpp"
#include "longdr/common/numeric.hpp"
#include "longdr/kernels/kernels.hpp"

namespace longdr::ad {

namespace {

void require_same_tape(Var a, Var b) {
    if (a.tape != b.tape) throw ContractError("operands recorded on different tapes");
}

void require_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2) {
        throw DimensionError(std::string(op) + " expects a matrix, got " + shape_string(t.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape " + shape_string(a.shape()) + " vs " +
                             shape_string(b.shape()));
    }
}

} // namespace

const char* to_string(UnaryKind kind) {
    switch (kind) {
    case UnaryKind::sigmoid: return "sigmoid";
    case UnaryKind::tanh: return "tanh";
    case UnaryKind::relu: return "relu";
    case UnaryKind::log: return "log";
    case UnaryKind::exp: return "exp";
    case UnaryKind::clip01: return "clip01";
    case UnaryKind::square: return "square";
    case UnaryKind::softplus: return "softplus";
    }
    return "unknown";
}

Var matmul(Var a, Var b) {
    require_same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_rank2(av, "matmul");
    require_rank2(bv, "matmul");
    const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
    if (bv.rows() != k) {
        throw DimensionError("matmul inner dimensions differ: " + shape_string(av.shape()) + " x " +
                             shape_string(bv.shape()));
    }
    Tensor out(Shape{m, n});
    kernels::gemm_nn(av.raw(), bv.raw(), out.raw(), m, k, n, false);
    const std::size_t ia = a.id, ib = b.id;
    return a.tape->record("matmul", std::move(out), {ia, ib},
                          [ia, ib, m, k, n](Tape& t, const Tensor& g) {
                              if (t.requires_grad(ia)) {
                                  kernels::gemm_nt(g.raw(), t.value(ib).raw(),
                                                   t.accumulate(ia).raw(), m, n, k, true);
                              }
                              if (t.requires_grad(ib)) {
                                  kernels::gemm_tn(t.value(ia).raw(), g.raw(),
                                                   t.accumulate(ib).raw(), k, m, n, true);
                              }
                          });
}

Var add(Var a, Var b) {
    require_same_tape(a, b);
    require_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    const auto& bv = b.value().storage();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    const std::size_t ia = a.id, ib = b.id;
    return a.tape->record("add", std::move(out), {ia, ib}, [ia, ib](Tape& t, const Tensor& g) {
        for (auto id : {ia, ib}) {
            if (!t.requires_grad(id)) continue;
            Tensor& d = t.accumulate(id);
            for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
        }
    });
}

Var sub(Var a, Var b) {
    require_same_tape(a, b);
    require_same_shape(a.value(), b.value(), "sub");
    Tensor out = a.value();
    const auto& bv = b.value().storage();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    const std::size_t ia = a.id, ib = b.id;
    return a.tape->record("sub", std::move(out), {ia, ib}, [ia, ib](Tape& t, const Tensor& g) {
        if (t.requires_grad(ia)) {
            Tensor& d = t.accumulate(ia);
            for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
        }
        if (t.requires_grad(ib)) {
            Tensor& d = t.accumulate(ib);
            for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
        }
    });
}

Var mul(Var a, Var b) {
    require_same_tape(a, b);
    require_same_shape(a.value(), b.value(), "mul");
    Tensor out = a.value();
    const auto& bv = b.value().storage();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    const std::size_t ia = a.id, ib = b.id;
    return a.tape->record("mul", std::move(out), {ia, ib}, [ia, ib](Tape& t, const Tensor& g) {
        if (t.requires_grad(ia)) {
            Tensor& d = t.accumulate(ia);
            const Tensor& other = t.value(ib);
            for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * other[i];
        }
        if (t.requires_grad(ib)) {
            Tensor& d = t.accumulate(ib);
            const Tensor& other = t.value(ia);
            for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * other[i];
        }
    });
}

Var scale(Var x, double c) {
    Tensor out = x.value();
    for (double& v : out.data()) v *= c;
    const std::size_t ix = x.id;
    return x.tape->record("scale", std::move(out), {ix}, [ix, c](Tape& t, const Tensor& g) {
        Tensor& d = t.accumulate(ix);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += c * g[i];
    });
}

Var add_scalar(Var x, double c) {
    Tensor out = x.value();
    for (double& v : out.data()) v += c;
    const std::size_t ix = x.id;
    return x.tape->record("add_scalar", std::move(out), {ix}, [ix](Tape& t, const Tensor& g) {
        Tensor& d = t.accumulate(ix);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    });
}

Var add_bias(Var x, Var bias) {
    require_same_tape(x, bias);
    const Tensor& xv = x.value();
    const Tensor& bv = bias.value();
    require_rank2(xv, "add_bias");
    const std::size_t r = xv.rows(), c = xv.cols();
    if (bv.size() != c || bv.rows() != 1) {
        throw DimensionError("add_bias: bias " + shape_string(bv.shape()) + " for input " +
                             shape_string(xv.shape()));
    }
    Tensor out = xv;
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] += bv[j];
    const std::size_t ix = x.id, ib = bias.id;
    return x.tape->record("add_bias", std::move(out), {ix, ib},
                          [ix, ib, r, c](Tape& t, const Tensor& g) {
                              if (t.requires_grad(ix)) {
                                  Tensor& d = t.accumulate(ix);
                                  for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                              }
                              if (t.requires_grad(ib)) {
                                  Tensor& d = t.accumulate(ib);
                                  for (std::size_t i = 0; i < r; ++i)
                                      for (std::size_t j = 0; j < c; ++j) d[j] += g[i * c + j];
                              }
                          });
}

Var linear(Var x, Var weight, Var bias) { return add_bias(matmul(x, weight), bias); }

Var unary(UnaryKind kind, Var x) {
    const Tensor& xv = x.value();
    Tensor out(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const double v = xv[i];
        switch (kind) {
        case UnaryKind::sigmoid: out[i] = expit(v); break;
        case UnaryKind::tanh: out[i] = std::tanh(v); break;
        case UnaryKind::relu: out[i] = v > 0.0 ? v : 0.0; break;
        case UnaryKind::log:
            if (!(v > 0.0)) {
                throw DomainError("log of non-positive value " + std::to_string(v) + " at index " +
                                  std::to_string(i));
            }
            out[i] = std::log(v);
            break;
        case UnaryKind::exp: out[i] = std::exp(v); break;
        case UnaryKind::clip01: out[i] = longdr::clip01(v); break;
        case UnaryKind::square: out[i] = v * v; break;
        case UnaryKind::softplus: out[i] = std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); break;
        }
    }
    const std::size_t ix = x.id;
    return x.tape->record(to_string(kind), std::move(out), {ix},
                          [ix, kind, self = x.tape->size()](Tape& t, const Tensor& g) {
                              const Tensor& in = t.value(ix);
                              const Tensor& y = t.value(self);
                              Tensor& d = t.accumulate(ix);
                              for (std::size_t i = 0; i < g.size(); ++i) {
                                  double dy = 0.0;
                                  switch (kind) {
                                  case UnaryKind::sigmoid: dy = y[i] * (1.0 - y[i]); break;
                                  case UnaryKind::tanh: dy = 1.0 - y[i] * y[i]; break;
                                  case UnaryKind::relu: dy = in[i] > 0.0 ? 1.0 : 0.0; break;
                                  case UnaryKind::log: dy = 1.0 / in[i]; break;
                                  case UnaryKind::exp: dy = y[i]; break;
                                  case UnaryKind::clip01:
                                      dy = (in[i] >= 0.0 && in[i] <= 1.0) ? 1.0 : 0.0;
                                      break;
                                  case UnaryKind::square: dy = 2.0 * in[i]; break;
                                  case UnaryKind::softplus: dy = expit(in[i]); break;
                                  }
                                  d[i] += g[i] * dy;
                              }
                          });
}

Var sum(Var x) {
    const double s = pairwise_sum(x.value().data());
    const std::size_t ix = x.id;
    return x.tape->record("sum", Tensor::scalar(s), {ix}, [ix](Tape& t, const Tensor& g) {
        Tensor& d = t.accumulate(ix);
        const double gv = g[0];
        for (double& v : d.data()) v += gv;
    });
}

Var mean(Var x) {
    const std::size_t n = x.value().size();
    if (n == 0) throw ContractError("mean of empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(n));
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
    require_same_tape(x, gamma);
    require_same_tape(x, beta);
    const Tensor& xv = x.value();
    require_rank2(xv, "layer_norm");
    const std::size_t r = xv.rows(), c = xv.cols();
    if (gamma.value().size() != c || beta.value().size() != c) {
        throw DimensionError("layer_norm: affine parameters do not match " + std::to_string(c) +
                             " features");
    }
    auto xhat = std::make_shared<std::vector<double>>(r * c);
    auto rstd = std::make_shared<std::vector<double>>(r);
    Tensor out(xv.shape());
    const Tensor& gv = gamma.value();
    const Tensor& bv = beta.value();
    for (std::size_t i = 0; i < r; ++i) {
        const double* row = xv.raw() + i * c;
        double mu = 0.0;
        for (std::size_t j = 0; j < c; ++j) mu += row[j];
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<double>(c);
        const double rs = 1.0 / std::sqrt(var + eps);
        (*rstd)[i] = rs;
        for (std::size_t j = 0; j < c; ++j) {
            const double xh = (row[j] - mu) * rs;
            (*xhat)[i * c + j] = xh;
            out[i * c + j] = xh * gv[j] + bv[j];
        }
    }
    const std::size_t ix = x.id, ig = gamma.id, ib = beta.id;
    return x.tape->record(
        "layer_norm", std::move(out), {ix, ig, ib},
        [ix, ig, ib, r, c, xhat, rstd](Tape& t, const Tensor& g) {
            const Tensor& gv = t.value(ig);
            if (t.requires_grad(ig)) {
                Tensor& dg = t.accumulate(ig);
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) dg[j] += g[i * c + j] * (*xhat)[i * c + j];
            }
            if (t.requires_grad(ib)) {
                Tensor& db = t.accumulate(ib);
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) db[j] += g[i * c + j];
            }
            if (t.requires_grad(ix)) {
                Tensor& dx = t.accumulate(ix);
                const double inv_c = 1.0 / static_cast<double>(c);
                for (std::size_t i = 0; i < r; ++i) {
                    double m1 = 0.0, m2 = 0.0;
                    for (std::size_t j = 0; j < c; ++j) {
                        const double dxh = g[i * c + j] * gv[j];
                        m1 += dxh;
                        m2 += dxh * (*xhat)[i * c + j];
                    }
                    m1 *= inv_c;
                    m2 *= inv_c;
                    for (std::size_t j = 0; j < c; ++j) {
                        const double dxh = g[i * c + j] * gv[j];
                        dx[i * c + j] += (*rstd)[i] * (dxh - m1 - (*xhat)[i * c + j] * m2);
                    }
                }
            }
        });
}

Var causal_attention(Var q, Var k, Var v, std::size_t batch, std::size_t seq, std::size_t heads) {
    require_same_tape(q, k);
    require_same_tape(q, v);
    const Tensor& qv = q.value();
    require_rank2(qv, "causal_attention");
    require_same_shape(qv, k.value(), "causal_attention");
    require_same_shape(qv, v.value(), "causal_attention");
    const std::size_t hidden = qv.cols();
    if (heads == 0 || hidden % heads != 0) {
        throw DimensionError("causal_attention: hidden " + std::to_string(hidden) +
                             " not divisible by heads " + std::to_string(heads));
    }
    if (qv.rows() != batch * seq) {
        throw DimensionError("causal_attention: rows " + std::to_string(qv.rows()) + " != " +
                             std::to_string(batch) + "*" + std::to_string(seq));
    }
    const kernels::AttentionShape s{batch, seq, heads, hidden / heads};
    auto probs = std::make_shared<std::vector<double>>(s.prob_size());
    Tensor out(qv.shape());
    kernels::causal_attention_forward(s, qv.raw(), k.value().raw(), v.value().raw(), out.raw(),
                                      probs->data());
    const std::size_t iq = q.id, ik = k.id, iv = v.id;
    return q.tape->record("causal_attention", std::move(out), {iq, ik, iv},
                          [iq, ik, iv, s, probs](Tape& t, const Tensor& g) {
                              // The kernel writes all three gradients; route unused ones to scratch.
                              Tensor scratch_q, scratch_k, scratch_v;
                              auto sink = [&](std::size_t id, Tensor& scratch) -> double* {
                                  if (t.requires_grad(id)) return t.accumulate(id).raw();
                                  scratch = Tensor(t.value(id).shape());
                                  return scratch.raw();
                              };
                              double* dq = sink(iq, scratch_q);
                              double* dk = sink(ik, scratch_k);
                              double* dv = sink(iv, scratch_v);
                              kernels::causal_attention_backward(
                                  s, t.value(iq).raw(), t.value(ik).raw(), t.value(iv).raw(),
                                  probs->data(), g.raw(), dq, dk, dv);
                          });
}

Var prefix_attention(Var q_branch, Var k_branch, Var v_branch, Var keys_prefix,
                     Var values_prefix, std::size_t seq, std::size_t heads,
                     std::size_t rows_per_unit, std::span<const std::size_t> positions) {
    Tape& tape = *q_branch.tape;
    for (Var v : {q_branch, k_branch, v_branch, keys_prefix, values_prefix}) {
        if (v.tape != &tape) throw ContractError("operands recorded on different tapes");
        if (tape.requires_grad(v.id)) {
            throw ContractError("prefix_attention is forward-only; inputs must not require grad");
        }
    }
    const Tensor& qv = q_branch.value();
    const std::size_t hidden = qv.cols();
    if (heads == 0 || hidden % heads != 0) {
        throw DimensionError("prefix_attention: hidden not divisible by heads");
    }
    if (positions.size() != qv.rows()) {
        throw DimensionError("prefix_attention: one position per branch row required");
    }
    const kernels::AttentionShape s{keys_prefix.value().rows() / seq, seq, heads, hidden / heads};
    Tensor out(qv.shape());
    kernels::prefix_attention_forward(s, rows_per_unit, positions, qv.raw(), k_branch.value().raw(),
                                      v_branch.value().raw(), keys_prefix.value().raw(),
                                      values_prefix.value().raw(), out.raw());
    return tape.record("prefix_attention", std::move(out),
                       {q_branch.id, k_branch.id, v_branch.id, keys_prefix.id, values_prefix.id},
                       {});
}

Var dropout(Var x, double p, std::mt19937_64& rng) {
    if (p <= 0.0) return x;
    if (p >= 1.0) throw ContractError("dropout rate must be < 1");
    const Tensor& xv = x.value();
    auto mask = std::make_shared<std::vector<double>>(xv.size());
    std::bernoulli_distribution keep(1.0 - p);
    const double inv = 1.0 / (1.0 - p);
    Tensor out(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) {
        (*mask)[i] = keep(rng) ? inv : 0.0;
        out[i] = xv[i] * (*mask)[i];
    }
    const std::size_t ix = x.id;
    return x.tape->record("dropout", std::move(out), {ix}, [ix, mask](Tape& t, const Tensor& g) {
        Tensor& d = t.accumulate(ix);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * (*mask)[i];
    });
}

Var gather_rows(Var x, std::vector<std::size_t> indices) {
    const Tensor& xv = x.value();
    require_rank2(xv, "gather_rows");
    const std::size_t c = xv.cols();
    Tensor out(Shape{indices.size(), c});
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= xv.rows()) {
            throw DimensionError("gather_rows: index " + std::to_string(indices[i]) +
                                 " out of range " + std::to_string(xv.rows()));
        }
        std::copy_n(xv.raw() + indices[i] * c, c, out.raw() + i * c);
    }
    const std::size_t ix = x.id;
    return x.tape->record("gather_rows", std::move(out), {ix},
                          [ix, c, idx = std::move(indices)](Tape& t, const Tensor& g) {
                              Tensor& d = t.accumulate(ix);
                              for (std::size_t i = 0; i < idx.size(); ++i) {
                                  double* dst = d.raw() + idx[i] * c;
                                  const double* src = g.raw() + i * c;
                                  for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
                              }
                          });
}

Var concat_rows(Var a, Var b) {
    require_same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_rank2(av, "concat_rows");
    require_rank2(bv, "concat_rows");
    if (av.cols() != bv.cols()) throw DimensionError("concat_rows: column counts differ");
    Tensor out(Shape{av.rows() + bv.rows(), av.cols()});
    std::copy(av.storage().begin(), av.storage().end(), out.raw());
    std::copy(bv.storage().begin(), bv.storage().end(), out.raw() + av.size());
    const std::size_t ia = a.id, ib = b.id, na = av.size();
    return a.tape->record("concat_rows", std::move(out), {ia, ib},
                          [ia, ib, na](Tape& t, const Tensor& g) {
                              if (t.requires_grad(ia)) {
                                  Tensor& d = t.accumulate(ia);
                                  for (std::size_t i = 0; i < na; ++i) d[i] += g[i];
                              }
                              if (t.requires_grad(ib)) {
                                  Tensor& d = t.accumulate(ib);
                                  for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[na + i];
                              }
                          });
}

Var slice_cols(Var x, std::size_t begin, std::size_t end) {
    const Tensor& xv = x.value();
    require_rank2(xv, "slice_cols");
    if (begin >= end || end > xv.cols()) {
        throw DimensionError("slice_cols: bad range [" + std::to_string(begin) + "," +
                             std::to_string(end) + ") of " + std::to_string(xv.cols()));
    }
    const std::size_t r = xv.rows(), c = xv.cols(), w = end - begin;
    Tensor out(Shape{r, w});
    for (std::size_t i = 0; i < r; ++i)
        std::copy_n(xv.raw() + i * c + begin, w, out.raw() + i * w);
    const std::size_t ix = x.id;
    return x.tape->record("slice_cols", std::move(out), {ix},
                          [ix, r, c, w, begin](Tape& t, const Tensor& g) {
                              Tensor& d = t.accumulate(ix);
                              for (std::size_t i = 0; i < r; ++i)
                                  for (std::size_t j = 0; j < w; ++j)
                                      d[i * c + begin + j] += g[i * w + j];
                          });
}

Var bce_with_logits(Var logits, Var targets) {
    return sub(softplus(logits), mul(targets, logits));
}

} // namespace longdr::ad
