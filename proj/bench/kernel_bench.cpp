// OpenMP kernels against the serial reference on model-sized shapes.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "longdr/kernels/kernels.hpp"

namespace kn = longdr::kernels;

namespace {

std::vector<double> random_vec(std::size_t n) {
    std::mt19937_64 rng(n);
    std::normal_distribution<double> nd;
    std::vector<double> v(n);
    for (auto& x : v) x = nd(rng);
    return v;
}

template <bool Parallel>
void bm_gemm(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0));
    const std::size_t k = 64, n = 64;
    auto a = random_vec(m * k), b = random_vec(k * n);
    std::vector<double> c(m * n);
    for (auto _ : state) {
        if constexpr (Parallel) kn::gemm_nn(a.data(), b.data(), c.data(), m, k, n, false);
        else kn::reference::gemm_nn(a.data(), b.data(), c.data(), m, k, n, false);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * m * k * n));
}

template <bool Parallel>
void bm_attention(benchmark::State& state) {
    const kn::AttentionShape s{static_cast<std::size_t>(state.range(0)), 20, 2, 8};
    const std::size_t n = s.rows() * s.hidden();
    auto q = random_vec(n), k = random_vec(n + 1), v = random_vec(n + 2);
    std::vector<double> out(n), probs(s.prob_size());
    for (auto _ : state) {
        if constexpr (Parallel)
            kn::causal_attention_forward(s, q.data(), k.data(), v.data(), out.data(), probs.data());
        else
            kn::reference::causal_attention_forward(s, q.data(), k.data(), v.data(), out.data(),
                                                    probs.data());
        benchmark::DoNotOptimize(out.data());
    }
}

} // namespace

BENCHMARK(bm_gemm<true>)->Arg(128)->Arg(1024)->Arg(8192);
BENCHMARK(bm_gemm<false>)->Arg(128)->Arg(1024)->Arg(8192);
BENCHMARK(bm_attention<true>)->Arg(32)->Arg(256);
BENCHMARK(bm_attention<false>)->Arg(32)->Arg(256);

BENCHMARK_MAIN();
