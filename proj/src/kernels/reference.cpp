// Serial reference kernels. Written for clarity, not speed: explicit index
// arithmetic, full score matrices, no blocking.

#include <cmath>
#include <vector>

#include "longdr/kernels/kernels.hpp"

namespace longdr::kernels::reference {

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
            c[i * n + j] = accumulate ? c[i * n + j] + s : s;
        }
    }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
            c[i * n + j] = accumulate ? c[i * n + j] + s : s;
        }
    }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[p * m + i] * b[p * n + j];
            c[i * n + j] = accumulate ? c[i * n + j] + s : s;
        }
    }
}

namespace {

double at(const double* x, const AttentionShape& s, std::size_t b, std::size_t pos,
          std::size_t h, std::size_t e) {
    return x[(b * s.seq + pos) * s.hidden() + h * s.head_dim + e];
}

} // namespace

void causal_attention_forward(const AttentionShape& s, const double* q, const double* k,
                              const double* v, double* out, double* probs) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(s.head_dim));
    for (std::size_t b = 0; b < s.batch; ++b) {
        for (std::size_t h = 0; h < s.heads; ++h) {
            std::vector<double> scores(s.seq * s.seq, 0.0);
            for (std::size_t i = 0; i < s.seq; ++i) {
                for (std::size_t j = 0; j < s.seq; ++j) {
                    if (j > i) continue;
                    double dot = 0.0;
                    for (std::size_t e = 0; e < s.head_dim; ++e)
                        dot += at(q, s, b, i, h, e) * at(k, s, b, j, h, e);
                    scores[i * s.seq + j] = dot * scale;
                }
            }
            double* p = probs + (b * s.heads + h) * s.seq * s.seq;
            for (std::size_t i = 0; i < s.seq; ++i) {
                double mx = scores[i * s.seq];
                for (std::size_t j = 1; j <= i; ++j) mx = std::max(mx, scores[i * s.seq + j]);
                double z = 0.0;
                for (std::size_t j = 0; j <= i; ++j) z += std::exp(scores[i * s.seq + j] - mx);
                for (std::size_t j = 0; j < s.seq; ++j)
                    p[i * s.seq + j] = j <= i ? std::exp(scores[i * s.seq + j] - mx) / z : 0.0;
            }
            for (std::size_t i = 0; i < s.seq; ++i) {
                for (std::size_t e = 0; e < s.head_dim; ++e) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < s.seq; ++j)
                        acc += p[i * s.seq + j] * at(v, s, b, j, h, e);
                    out[(b * s.seq + i) * s.hidden() + h * s.head_dim + e] = acc;
                }
            }
        }
    }
}

void causal_attention_backward(const AttentionShape& s, const double* q, const double* k,
                               const double* v, const double* probs, const double* dout,
                               double* dq, double* dk, double* dv) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(s.head_dim));
    const std::size_t hd = s.hidden();
    for (std::size_t b = 0; b < s.batch; ++b) {
        for (std::size_t h = 0; h < s.heads; ++h) {
            const double* p = probs + (b * s.heads + h) * s.seq * s.seq;
            // dP = dO V^T, dS = P * (dP - rowsum(P * dP))
            std::vector<double> dp(s.seq * s.seq, 0.0);
            for (std::size_t i = 0; i < s.seq; ++i)
                for (std::size_t j = 0; j < s.seq; ++j)
                    for (std::size_t e = 0; e < s.head_dim; ++e)
                        dp[i * s.seq + j] += at(dout, s, b, i, h, e) * at(v, s, b, j, h, e);
            std::vector<double> ds(s.seq * s.seq, 0.0);
            for (std::size_t i = 0; i < s.seq; ++i) {
                double rowdot = 0.0;
                for (std::size_t j = 0; j < s.seq; ++j) rowdot += p[i * s.seq + j] * dp[i * s.seq + j];
                for (std::size_t j = 0; j < s.seq; ++j)
                    ds[i * s.seq + j] = p[i * s.seq + j] * (dp[i * s.seq + j] - rowdot) * scale;
            }
            for (std::size_t i = 0; i < s.seq; ++i) {
                for (std::size_t e = 0; e < s.head_dim; ++e) {
                    double gq = 0.0, gk = 0.0, gv = 0.0;
                    for (std::size_t j = 0; j < s.seq; ++j) {
                        gq += ds[i * s.seq + j] * at(k, s, b, j, h, e);
                        gk += ds[j * s.seq + i] * at(q, s, b, j, h, e);
                        gv += p[j * s.seq + i] * at(dout, s, b, j, h, e);
                    }
                    const std::size_t idx = (b * s.seq + i) * hd + h * s.head_dim + e;
                    dq[idx] += gq;
                    dk[idx] += gk;
                    dv[idx] += gv;
                }
            }
        }
    }
}

void prefix_attention_forward(const AttentionShape& s, std::size_t rows_per_unit,
                              std::span<const std::size_t> positions, const double* q_branch,
                              const double* k_branch, const double* v_branch,
                              const double* keys_prefix, const double* values_prefix,
                              double* out) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(s.head_dim));
    const std::size_t hd = s.hidden();
    for (std::size_t r = 0; r < positions.size(); ++r) {
        const std::size_t unit = r / rows_per_unit;
        const std::size_t pos = positions[r];
        for (std::size_t h = 0; h < s.heads; ++h) {
            std::vector<double> keys, vals;
            for (std::size_t j = 0; j < pos; ++j) {
                for (std::size_t e = 0; e < s.head_dim; ++e) {
                    keys.push_back(keys_prefix[(unit * s.seq + j) * hd + h * s.head_dim + e]);
                    vals.push_back(values_prefix[(unit * s.seq + j) * hd + h * s.head_dim + e]);
                }
            }
            for (std::size_t e = 0; e < s.head_dim; ++e) {
                keys.push_back(k_branch[r * hd + h * s.head_dim + e]);
                vals.push_back(v_branch[r * hd + h * s.head_dim + e]);
            }
            const std::size_t n = pos + 1;
            std::vector<double> sc(n);
            for (std::size_t j = 0; j < n; ++j) {
                double dot = 0.0;
                for (std::size_t e = 0; e < s.head_dim; ++e)
                    dot += q_branch[r * hd + h * s.head_dim + e] * keys[j * s.head_dim + e];
                sc[j] = dot * scale;
            }
            double mx = sc[0];
            for (double x : sc) mx = std::max(mx, x);
            double z = 0.0;
            for (double x : sc) z += std::exp(x - mx);
            for (std::size_t e = 0; e < s.head_dim; ++e) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j)
                    acc += std::exp(sc[j] - mx) / z * vals[j * s.head_dim + e];
                out[r * hd + h * s.head_dim + e] = acc;
            }
        }
    }
}

} // namespace longdr::kernels::reference
