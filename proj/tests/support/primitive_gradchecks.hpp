#pragma once

// Central-difference checks of every autodiff primitive at random points,
// shared by the unit and acceptance suites.

#include <random>
#include <string>
#include <vector>

#include "gradcheck.hpp"

namespace longdr::testing {

struct NamedGradCheck {
    std::string name;
    GradCheckResult result;
};

inline std::vector<NamedGradCheck> primitive_gradchecks(std::uint64_t seed) {
    using namespace ad;

    std::mt19937_64 rng(seed);
    std::vector<NamedGradCheck> out;
    auto check = [&](const char* name, const LossBuilder& build, std::vector<Tensor> inputs) {
        out.push_back({name, gradcheck(build, std::move(inputs))});
    };
    auto random_tensor = [](Shape shape, std::mt19937_64& g, double lo = -1.0, double hi = 1.0) {
        std::uniform_real_distribution<double> u(lo, hi);
        Tensor t(std::move(shape));
        for (double& x : t.data()) x = u(g);
        return t;
    };
    // Weighted sums avoid symmetric cancellations hiding a wrong sign.
    auto weights = [&](Shape s) { return random_tensor(std::move(s), rng, 0.5, 1.5); };
    const Tensor w23 = weights({2, 3});
    auto wsum = [w23](Tape& t, Var x) { return sum(mul(x, t.constant(w23))); };

    check("matmul", [&](Tape& t, const std::vector<Var>& v) { return wsum(t, matmul(v[0], v[1])); },
          {random_tensor({2, 4}, rng), random_tensor({4, 3}, rng)});
    check("add", [&](Tape& t, const std::vector<Var>& v) { return wsum(t, add(v[0], v[1])); },
          {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)});
    check("sub", [&](Tape& t, const std::vector<Var>& v) { return wsum(t, sub(v[0], v[1])); },
          {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)});
    check("mul", [&](Tape& t, const std::vector<Var>& v) { return wsum(t, mul(v[0], v[1])); },
          {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)});
    check("add_bias", [&](Tape& t, const std::vector<Var>& v) { return wsum(t, add_bias(v[0], v[1])); },
          {random_tensor({2, 3}, rng), random_tensor({3}, rng)});
    check("scale_shift", [&](Tape& t, const std::vector<Var>& v) { return wsum(t, scale(add_scalar(v[0], 0.3), -2.0)); },
          {random_tensor({2, 3}, rng)});
    for (auto kind : {UnaryKind::sigmoid, UnaryKind::tanh, UnaryKind::exp, UnaryKind::square,
                      UnaryKind::softplus}) {
        check(to_string(kind), [&](Tape& t, const std::vector<Var>& v) { return wsum(t, unary(kind, v[0])); },
              {random_tensor({2, 3}, rng, -2.0, 2.0)});
    }
    // Kinked maps: keep points away from the kinks.
    check("log", [&](Tape& t, const std::vector<Var>& v) { return wsum(t, ad::log(v[0])); },
          {random_tensor({2, 3}, rng, 0.2, 3.0)});
    check("relu", [&](Tape& t, const std::vector<Var>& v) { return wsum(t, relu(v[0])); },
          {Tensor(Shape{2, 3}, {-0.9, -0.3, 0.2, 0.5, 1.1, -1.4})});
    check("clip01", [&](Tape& t, const std::vector<Var>& v) { return wsum(t, clip01(v[0])); },
          {Tensor(Shape{2, 3}, {-0.5, 0.1, 0.45, 0.8, 1.3, 2.0})});
    check("layer_norm", [&](Tape& t, const std::vector<Var>& v) { return wsum(t, layer_norm(v[0], v[1], v[2])); },
          {random_tensor({2, 3}, rng, -2.0, 2.0), random_tensor({3}, rng), random_tensor({3}, rng)});
    check("causal_attention",
        [&](Tape& t, const std::vector<Var>& v) {
            auto out = causal_attention(v[0], v[1], v[2], 2, 3, 2);
            return sum(mul(out, t.constant(Tensor(Shape{6, 4}, 0.7))));
        },
        {random_tensor({6, 4}, rng), random_tensor({6, 4}, rng), random_tensor({6, 4}, rng)});
    check("gather_rows", [&](Tape& t, const std::vector<Var>& v) { return wsum(t, gather_rows(v[0], {2, 0})); },
          {random_tensor({3, 3}, rng)});
    const Tensor w33 = weights({3, 3});
    check("concat_rows",
        [&](Tape& t, const std::vector<Var>& v) {
            return sum(mul(concat_rows(v[0], v[1]), t.constant(w33)));
        },
        {random_tensor({1, 3}, rng), random_tensor({2, 3}, rng)});
    check("slice_cols", [&](Tape& t, const std::vector<Var>& v) { return wsum(t, slice_cols(v[0], 1, 4)); },
          {random_tensor({2, 5}, rng)});
    check("bce_with_logits",
        [&](Tape& t, const std::vector<Var>& v) {
            return wsum(t, bce_with_logits(v[0], t.constant(Tensor(Shape{2, 3}, {0, 1, 0.3, 1, 0, 0.8}))));
        },
        {random_tensor({2, 3}, rng, -3.0, 3.0)});
    check("mean_square", [&](Tape&, const std::vector<Var>& v) { return mean(square(v[0])); },
          {random_tensor({2, 3}, rng)});
    return out;
}

} // namespace longdr::testing
