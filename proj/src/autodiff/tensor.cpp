#include "longdr/autodiff/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "longdr/common/errors.hpp"

namespace longdr::ad {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size()) {
        throw DimensionError("tensor shape " + shape_string(shape_) + " does not match " +
                             std::to_string(data_.size()) + " values");
    }
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
    return Tensor(Shape{rows, cols}, std::vector<double>(values));
}

std::size_t Tensor::rows() const {
    return rank() == 2 ? shape_[0] : 1;
}

std::size_t Tensor::cols() const {
    if (rank() == 2) return shape_[1];
    if (rank() == 1) return shape_[0];
    return 1;
}

double Tensor::item() const {
    if (data_.size() != 1) {
        throw ContractError("item() on tensor of shape " + shape_string(shape_));
    }
    return data_[0];
}

bool Tensor::all_finite() const {
    // x * 0 is NaN exactly for non-finite x; the sum stays branch-free.
    double acc = 0.0;
    for (double x : data_) acc += x * 0.0;
    return acc == 0.0;
}

} // namespace longdr::ad
