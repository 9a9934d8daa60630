#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace plq {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Tensor/layer shape disagreement. layer_index() is the index of the
/// offending layer inside a model pass, or -1 for standalone calls.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what, int layer_index = -1)
        : Error(what), layer_index_(layer_index) {}

    int layer_index() const noexcept { return layer_index_; }

private:
    int layer_index_;
};

/// Malformed file contents. byte_offset() points at the first invalid byte.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what, std::size_t byte_offset = 0)
        : Error(what + " (byte offset " + std::to_string(byte_offset) + ")"),
          byte_offset_(byte_offset) {}

    std::size_t byte_offset() const noexcept { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

/// Numeric failure: zero embedding, zero variance, non-finite input.
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace plq
