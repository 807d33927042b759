#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "etnode/errors.hpp"

namespace etnode {

/// Dense row-major tensor of 64-bit floats. Rank 0 (scalar) through rank 3
/// are used in practice; the shape is kept as a general dimension list.
class Tensor {
public:
    Tensor() = default;

    /// Zero-filled tensor of the given shape.
    static Tensor zeros(std::vector<std::size_t> shape);

    /// Constant-filled tensor.
    static Tensor full(std::vector<std::size_t> shape, double value);

    /// Rank-0 scalar.
    static Tensor scalar(double value);

    /// Tensor from explicit row-major data. Rejects non-finite entries and
    /// size mismatches.
    static Tensor from(std::vector<std::size_t> shape, std::vector<double> data);

    /// Unvalidated construction for op outputs; debug builds re-check
    /// finiteness at the recording site.
    static Tensor raw(std::vector<std::size_t> shape, std::vector<double> data);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty() && shape_.empty(); }

    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    /// Rank-2 element access.
    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    /// Rank-3 element access.
    double& at(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    /// Value of a rank-0 or single-element tensor.
    double scalar_value() const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    /// "(2, 3)" style shape string for error messages.
    std::string shape_str() const;

    static std::size_t shape_size(const std::vector<std::size_t>& shape);

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

/// Throws ShapeError mentioning both shapes unless they match.
void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

}  // namespace etnode
