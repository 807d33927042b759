#include "etnode/tensor.hpp"

#include <cmath>
#include <sstream>

namespace etnode {

std::size_t Tensor::shape_size(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw ShapeError("tensor dimension must be positive");
        n *= d;
    }
    return n;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    Tensor t;
    std::size_t n = shape_size(shape);
    t.shape_ = std::move(shape);
    t.data_.assign(n, 0.0);
    return t;
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t = zeros(std::move(shape));
    for (double& x : t.data_) x = value;
    return t;
}

Tensor Tensor::scalar(double value) {
    Tensor t;
    t.data_.assign(1, value);
    return t;
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> data) {
    Tensor t = raw(std::move(shape), std::move(data));
    if (!t.all_finite()) throw NumericError("non-finite entry in tensor input");
    return t;
}

Tensor Tensor::raw(std::vector<std::size_t> shape, std::vector<double> data) {
    std::size_t n = shape_size(shape);
    if (n != data.size()) {
        std::ostringstream os;
        os << "tensor data length " << data.size() << " does not match shape ";
        Tensor probe;
        probe.shape_ = shape;
        os << probe.shape_str();
        throw ShapeError(os.str());
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
}

double Tensor::scalar_value() const {
    if (data_.size() != 1) {
        throw ShapeError("expected a scalar tensor, got shape " + shape_str());
    }
    return data_[0];
}

bool Tensor::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << ", ";
        os << shape_[i];
    }
    os << ")";
    return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() +
                         " vs " + b.shape_str());
    }
}

}  // namespace etnode
