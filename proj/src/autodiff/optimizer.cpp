#include "longdr/autodiff/optimizer.hpp"

#include <cmath>

#include "longdr/common/errors.hpp"

namespace longdr::ad {

OptimizerKind parse_optimizer_kind(const std::string& name) {
    if (name == "adam") return OptimizerKind::adam;
    if (name == "sgd") return OptimizerKind::sgd;
    throw ConfigError("unknown optimizer '" + name + "' (expected adam or sgd)");
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::adam ? "adam" : "sgd"; }

OptimizerState make_optimizer(const ParameterSet& params, OptimizerKind kind, double learning_rate) {
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    OptimizerState state;
    state.kind = kind;
    state.learning_rate = learning_rate;
    if (kind == OptimizerKind::adam) {
        for (const auto& p : params) {
            state.first_moment.emplace_back(p.value.shape());
            state.second_moment.emplace_back(p.value.shape());
        }
    }
    return state;
}

void optimizer_step(ParameterSet& params, std::span<const Tensor> grads, OptimizerState& state) {
    if (grads.size() != params.size()) {
        throw DimensionError("optimizer_step: " + std::to_string(grads.size()) + " gradients for " +
                             std::to_string(params.size()) + " parameters");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!grads[i].same_shape(params[i].value)) {
            throw DimensionError("optimizer_step: gradient shape " + shape_string(grads[i].shape()) +
                                 " for parameter " + params[i].name);
        }
        if (!grads[i].all_finite()) {
            throw TrainingError("non-finite gradient for parameter '" + params[i].name + "'");
        }
    }
    if (state.kind == OptimizerKind::adam && state.first_moment.size() != params.size()) {
        throw DimensionError("optimizer_step: state was built for a different parameter set");
    }

    ++state.step;
    if (state.kind == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& w = params[i].value;
            for (std::size_t j = 0; j < w.size(); ++j) w[j] -= state.learning_rate * grads[i][j];
        }
        return;
    }

    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& w = params[i].value;
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        const auto& g = grads[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double mhat = m[j] / c1;
            const double vhat = v[j] / c2;
            w[j] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

} // namespace longdr::ad
