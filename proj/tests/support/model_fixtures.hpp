#pragma once

// Small random models and batches shared by the model, estimator and
// acceptance suites.

#include <random>
#include <vector>

#include "gradcheck.hpp"
#include "longdr/model/model.hpp"

namespace longdr::testing {

inline model::Batch random_batch(std::size_t n, std::size_t tau, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    model::Batch b;
    b.n = n;
    b.tau = tau;
    b.d = d;
    b.covariates = ad::Tensor(ad::Shape{n * tau, d});
    b.actions = ad::Tensor(ad::Shape{n * tau, 1});
    b.factual.resize(n * tau);
    for (double& x : b.covariates.data()) x = nd(rng);
    for (std::size_t r = 0; r < n * tau; ++r) {
        b.factual[r] = coin(rng) ? 1 : 0;
        b.actions[r] = b.factual[r];
    }
    return b;
}

// Scalar probe touching every head: sum(w_q * sigmoid(q)) + mean(bce(g, A)) + mean(w_s * s^2).
inline ad::Var probe_loss(ad::Tape& tape, const model::TapedForward& f, const model::Batch& b) {
    const auto& ql = f.q_logit.value();
    ad::Tensor wq(ql.shape());
    for (std::size_t i = 0; i < wq.size(); ++i) wq[i] = 0.3 + 0.1 * static_cast<double>(i % 7);
    ad::Tensor ws(f.s.value().shape());
    for (std::size_t i = 0; i < ws.size(); ++i) ws[i] = 0.5 + 0.05 * static_cast<double>(i % 5);
    const auto& gl = f.g_logit.value();
    ad::Tensor targets(gl.shape());
    for (std::size_t r = 0; r < b.n * b.tau; ++r)
        for (std::size_t m = 0; m < gl.cols(); ++m) targets[r * gl.cols() + m] = b.factual[r];
    auto lq = ad::sum(ad::mul(ad::sigmoid(f.q_logit), tape.constant(wq)));
    auto lg = ad::mean(ad::bce_with_logits(f.g_logit, tape.constant(targets)));
    auto ls = ad::mean(ad::mul(ad::square(f.s), tape.constant(ws)));
    return ad::add(ad::add(lq, lg), ls);
}

// Central differences over every parameter coordinate of the model.
inline GradCheckResult model_gradcheck(model::NuisanceModel m, const model::Batch& b, double step = 1e-5) {
    ad::Tape tape;
    const auto f = m.forward(tape, b);
    const auto grads = tape.backward(probe_loss(tape, f, b));
    auto loss_at = [&](const model::NuisanceModel& mm) {
        ad::Tape t;
        const auto ff = mm.forward(t, b, {nullptr, false, false});
        return probe_loss(t, ff, b).value().item();
    };
    GradCheckResult res;
    for (std::size_t i = 0; i < m.params().size(); ++i) {
        const ad::Tensor g = grads.of(f.params[i]);
        for (std::size_t j = 0; j < g.size(); ++j) {
            const double orig = m.params()[i].value[j];
            m.params()[i].value[j] = orig + step;
            const double up = loss_at(m);
            m.params()[i].value[j] = orig - step;
            const double down = loss_at(m);
            m.params()[i].value[j] = orig;
            res.max_rel_error = std::max(res.max_rel_error, relative_error(g[j], (up - down) / (2.0 * step)));
            ++res.points;
        }
    }
    return res;
}

} // namespace longdr::testing
