#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "longdr/autodiff/tensor.hpp"

namespace longdr::ad {

struct Parameter {
    std::string name;
    Tensor value;
};

using ParameterSet = std::vector<Parameter>;

enum class OptimizerKind { adam, sgd };

OptimizerKind parse_optimizer_kind(const std::string& name);
std::string to_string(OptimizerKind kind);

// Adam with bias correction, or plain gradient descent. Moment buffers are
// shaped like the parameters they track.
struct OptimizerState {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t step = 0;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
};

OptimizerState make_optimizer(const ParameterSet& params, OptimizerKind kind, double learning_rate);

// One update in place. grads[i] belongs to params[i]. Throws DimensionError on
// shape mismatch and TrainingError naming the parameter when a gradient is
// not finite (parameters are left untouched in that case).
void optimizer_step(ParameterSet& params, std::span<const Tensor> grads, OptimizerState& state);

} // namespace longdr::ad
