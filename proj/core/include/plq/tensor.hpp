#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace plq {

/// Dense row-major tensor of 64-bit floats, rank 1..4.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape);

    /// Builds a tensor from explicit values; throws ShapeError if the value
    /// count does not match the shape product.
    static Tensor from(std::vector<std::size_t> shape, std::vector<double> values);

    std::size_t rank() const noexcept { return shape.size(); }
    std::size_t numel() const noexcept { return data.size(); }
    bool empty() const noexcept { return data.empty(); }

    double& operator[](std::size_t i) noexcept { return data[i]; }
    double operator[](std::size_t i) const noexcept { return data[i]; }

    double& at2(std::size_t i, std::size_t j) noexcept {
        return data[i * shape[1] + j];
    }
    double at2(std::size_t i, std::size_t j) const noexcept {
        return data[i * shape[1] + j];
    }
    double& at3(std::size_t i, std::size_t j, std::size_t k) noexcept {
        return data[(i * shape[1] + j) * shape[2] + k];
    }
    double at3(std::size_t i, std::size_t j, std::size_t k) const noexcept {
        return data[(i * shape[1] + j) * shape[2] + k];
    }
    double& at4(std::size_t i, std::size_t j, std::size_t k, std::size_t l) noexcept {
        return data[((i * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }
    double at4(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const noexcept {
        return data[((i * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }

    bool same_shape(const Tensor& other) const noexcept { return shape == other.shape; }
    bool all_finite() const noexcept;
    double l2_norm() const noexcept;
    void scale(double factor) noexcept;

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::string shape_to_string(const std::vector<std::size_t>& shape);

/// Pixel rectangle covering rows [top, top+height) and cols [left, left+width).
struct Rect {
    int top = 0;
    int left = 0;
    int height = 0;
    int width = 0;
};

/// Images are tensors of shape {H, W, C} with intensities in [0, 1].
using Image = Tensor;

} // namespace plq
