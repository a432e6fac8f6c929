#pragma once

// Dense numeric kernels used by the autodiff ops and the sequence model.
//
// Every kernel exists twice: the OpenMP version in longdr::kernels, and a
// plain serial version in longdr::kernels::reference that is kept as the
// test oracle and benchmark baseline. The parallel versions only split work
// over independent output rows (or independent (batch, head) blocks), so each
// output element is produced by exactly one thread with a fixed summation
// order. Results are therefore bit-identical for any thread count.
//
// All matrices are row-major and contiguous.

#include <cstddef>
#include <span>

namespace longdr::kernels {

// c[m,n] (+)= a[m,k] * b[k,n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);

// c[m,n] (+)= a[m,k] * b[n,k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);

// c[m,n] (+)= a[k,m]^T * b[k,n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);

struct AttentionShape {
    std::size_t batch = 0;
    std::size_t seq = 0;
    std::size_t heads = 0;
    std::size_t head_dim = 0;

    std::size_t hidden() const { return heads * head_dim; }
    std::size_t rows() const { return batch * seq; }
    std::size_t prob_size() const { return batch * heads * seq * seq; }
};

// Multi-head causal self-attention. q, k, v, out are [batch*seq, hidden];
// head h owns columns [h*head_dim, (h+1)*head_dim). probs receives the
// softmax weights [batch, heads, seq, seq] (upper triangle zero).
void causal_attention_forward(const AttentionShape& s, const double* q, const double* k,
                              const double* v, double* out, double* probs);

// Accumulates into dq, dk, dv.
void causal_attention_backward(const AttentionShape& s, const double* q, const double* k,
                               const double* v, const double* probs, const double* dout,
                               double* dq, double* dk, double* dv);

// Single-row attention against a cached prefix. Row r of q/k/v_branch belongs
// to unit r / rows_per_unit and sits at sequence position positions[r]; it
// attends to keys_prefix/values_prefix rows [unit*seq, unit*seq + position)
// followed by its own key. Used to evaluate substituted-action tokens without
// re-running the whole sequence.
void prefix_attention_forward(const AttentionShape& s, std::size_t rows_per_unit,
                              std::span<const std::size_t> positions, const double* q_branch,
                              const double* k_branch, const double* v_branch,
                              const double* keys_prefix, const double* values_prefix,
                              double* out);

namespace reference {

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);
void causal_attention_forward(const AttentionShape& s, const double* q, const double* k,
                              const double* v, double* out, double* probs);
void causal_attention_backward(const AttentionShape& s, const double* q, const double* k,
                               const double* v, const double* probs, const double* dout,
                               double* dq, double* dk, double* dv);
void prefix_attention_forward(const AttentionShape& s, std::size_t rows_per_unit,
                              std::span<const std::size_t> positions, const double* q_branch,
                              const double* k_branch, const double* v_branch,
                              const double* keys_prefix, const double* values_prefix,
                              double* out);

} // namespace reference

int max_threads();

} // namespace longdr::kernels
