#include "longdr/kernels/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace longdr::kernels {

namespace {

using Index = std::ptrdiff_t;

// Parallel regions are only worth opening above this many multiply-adds.
constexpr std::size_t kParallelWork = 1 << 14;

} // namespace

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
    const bool par = m * k * n >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (Index ii = 0; ii < static_cast<Index>(m); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        double* crow = c + i * n;
        if (!accumulate) std::fill(crow, crow + n, 0.0);
        const double* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = arow[p];
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
    const bool par = m * k * n >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (Index ii = 0; ii < static_cast<Index>(m); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
            crow[j] = accumulate ? crow[j] + s : s;
        }
    }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
    const bool par = m * k * n >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (Index ii = 0; ii < static_cast<Index>(m); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        double* crow = c + i * n;
        if (!accumulate) std::fill(crow, crow + n, 0.0);
        for (std::size_t p = 0; p < k; ++p) {
            const double api = a[p * m + i];
            if (api == 0.0) continue;
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
        }
    }
}

void causal_attention_forward(const AttentionShape& s, const double* q, const double* k,
                              const double* v, double* out, double* probs) {
    const std::size_t hidden = s.hidden();
    const double scale = 1.0 / std::sqrt(static_cast<double>(s.head_dim));
    const auto blocks = static_cast<Index>(s.batch * s.heads);
    const bool par = s.batch * s.seq * s.seq * hidden >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (Index blk = 0; blk < blocks; ++blk) {
        const std::size_t bi = static_cast<std::size_t>(blk) / s.heads;
        const std::size_t h = static_cast<std::size_t>(blk) % s.heads;
        const std::size_t col = h * s.head_dim;
        double* pblock = probs + static_cast<std::size_t>(blk) * s.seq * s.seq;
        for (std::size_t i = 0; i < s.seq; ++i) {
            const double* qi = q + (bi * s.seq + i) * hidden + col;
            double* prow = pblock + i * s.seq;
            double mx = -HUGE_VAL;
            for (std::size_t j = 0; j <= i; ++j) {
                const double* kj = k + (bi * s.seq + j) * hidden + col;
                double dot = 0.0;
                for (std::size_t e = 0; e < s.head_dim; ++e) dot += qi[e] * kj[e];
                prow[j] = dot * scale;
                mx = std::max(mx, prow[j]);
            }
            double z = 0.0;
            for (std::size_t j = 0; j <= i; ++j) {
                prow[j] = std::exp(prow[j] - mx);
                z += prow[j];
            }
            const double inv = 1.0 / z;
            for (std::size_t j = 0; j <= i; ++j) prow[j] *= inv;
            for (std::size_t j = i + 1; j < s.seq; ++j) prow[j] = 0.0;

            double* oi = out + (bi * s.seq + i) * hidden + col;
            std::fill(oi, oi + s.head_dim, 0.0);
            for (std::size_t j = 0; j <= i; ++j) {
                const double* vj = v + (bi * s.seq + j) * hidden + col;
                const double pij = prow[j];
                for (std::size_t e = 0; e < s.head_dim; ++e) oi[e] += pij * vj[e];
            }
        }
    }
}

void causal_attention_backward(const AttentionShape& s, const double* q, const double* k,
                               const double* v, const double* probs, const double* dout,
                               double* dq, double* dk, double* dv) {
    const std::size_t hidden = s.hidden();
    const double scale = 1.0 / std::sqrt(static_cast<double>(s.head_dim));
    const auto blocks = static_cast<Index>(s.batch * s.heads);
    const bool par = s.batch * s.seq * s.seq * hidden >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (Index blk = 0; blk < blocks; ++blk) {
        const std::size_t bi = static_cast<std::size_t>(blk) / s.heads;
        const std::size_t h = static_cast<std::size_t>(blk) % s.heads;
        const std::size_t col = h * s.head_dim;
        const double* pblock = probs + static_cast<std::size_t>(blk) * s.seq * s.seq;
        std::vector<double> dp(s.seq);
        for (std::size_t i = 0; i < s.seq; ++i) {
            const std::size_t ri = (bi * s.seq + i) * hidden + col;
            const double* prow = pblock + i * s.seq;
            const double* doi = dout + ri;
            double rowdot = 0.0;
            for (std::size_t j = 0; j <= i; ++j) {
                const double* vj = v + (bi * s.seq + j) * hidden + col;
                double dot = 0.0;
                for (std::size_t e = 0; e < s.head_dim; ++e) dot += doi[e] * vj[e];
                dp[j] = dot;
                rowdot += prow[j] * dot;
            }
            double* dqi = dq + ri;
            const double* qi = q + ri;
            for (std::size_t j = 0; j <= i; ++j) {
                const std::size_t rj = (bi * s.seq + j) * hidden + col;
                const double pij = prow[j];
                const double ds = pij * (dp[j] - rowdot) * scale;
                const double* kj = k + rj;
                double* dkj = dk + rj;
                double* dvj = dv + rj;
                for (std::size_t e = 0; e < s.head_dim; ++e) {
                    dqi[e] += ds * kj[e];
                    dkj[e] += ds * qi[e];
                    dvj[e] += pij * doi[e];
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
    const std::size_t hidden = s.hidden();
    const double scale = 1.0 / std::sqrt(static_cast<double>(s.head_dim));
    const auto rows = static_cast<Index>(positions.size());
    const bool par = positions.size() * s.seq * hidden >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (Index rr = 0; rr < rows; ++rr) {
        const auto r = static_cast<std::size_t>(rr);
        const std::size_t unit = r / rows_per_unit;
        const std::size_t pos = positions[r];
        std::vector<double> w(pos + 1);
        for (std::size_t h = 0; h < s.heads; ++h) {
            const std::size_t col = h * s.head_dim;
            const double* qr = q_branch + r * hidden + col;
            double mx = -HUGE_VAL;
            for (std::size_t j = 0; j <= pos; ++j) {
                const double* kj = j < pos ? keys_prefix + (unit * s.seq + j) * hidden + col
                                           : k_branch + r * hidden + col;
                double dot = 0.0;
                for (std::size_t e = 0; e < s.head_dim; ++e) dot += qr[e] * kj[e];
                w[j] = dot * scale;
                mx = std::max(mx, w[j]);
            }
            double z = 0.0;
            for (std::size_t j = 0; j <= pos; ++j) {
                w[j] = std::exp(w[j] - mx);
                z += w[j];
            }
            double* orow = out + r * hidden + col;
            std::fill(orow, orow + s.head_dim, 0.0);
            for (std::size_t j = 0; j <= pos; ++j) {
                const double* vj = j < pos ? values_prefix + (unit * s.seq + j) * hidden + col
                                           : v_branch + r * hidden + col;
                const double pj = w[j] / z;
                for (std::size_t e = 0; e < s.head_dim; ++e) orow[e] += pj * vj[e];
            }
        }
    }
}

} // namespace longdr::kernels
