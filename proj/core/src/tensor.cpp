#include "plq/tensor.hpp"

#include <cmath>

#include "plq/errors.hpp"

namespace plq {

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    Tensor t;
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    t.shape = std::move(shape);
    t.data.assign(n, 0.0);
    return t;
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> values) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    if (n != values.size()) {
        throw ShapeError("tensor shape " + shape_to_string(shape) + " expects " +
                         std::to_string(n) + " values, got " + std::to_string(values.size()));
    }
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::move(values);
    return t;
}

bool Tensor::all_finite() const noexcept {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double Tensor::l2_norm() const noexcept {
    double s = 0.0;
    for (double v : data) s += v * v;
    return std::sqrt(s);
}

void Tensor::scale(double factor) noexcept {
    for (double& v : data) v *= factor;
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    s += "]";
    return s;
}

} // namespace plq
