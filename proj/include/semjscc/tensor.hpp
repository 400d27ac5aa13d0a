#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "semjscc/errors.hpp"

namespace semjscc {

// Dense row-major tensor of doubles. Rank is dynamic (1..4 in practice):
// images are (C,H,W), codewords and hashes are rank-1, conv weights rank-4.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)), v_(numel_of(shape_), 0.0) {}
    Tensor(std::vector<int> shape, std::vector<double> data)
        : shape_(std::move(shape)), v_(std::move(data)) {
        if (static_cast<std::size_t>(numel_of(shape_)) != v_.size())
            throw ConfigError("tensor data size does not match shape");
    }

    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(shape_.size()); }
    long numel() const { return static_cast<long>(v_.size()); }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    std::vector<double>& vec() { return v_; }
    const std::vector<double>& vec() const { return v_; }

    double& operator[](long i) { return v_[static_cast<std::size_t>(i)]; }
    double operator[](long i) const { return v_[static_cast<std::size_t>(i)]; }

    // (c,h,w) accessors for rank-3 tensors.
    double& at(int c, int h, int w) {
        return v_[static_cast<std::size_t>((static_cast<long>(c) * shape_[1] + h) * shape_[2] + w)];
    }
    double at(int c, int h, int w) const {
        return v_[static_cast<std::size_t>((static_cast<long>(c) * shape_[1] + h) * shape_[2] + w)];
    }

    void fill(double x) { std::fill(v_.begin(), v_.end(), x); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    std::string shape_str() const {
        std::string s = "(";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape_[i]);
        }
        return s + ")";
    }

    static long numel_of(const std::vector<int>& shape) {
        long n = 1;
        for (int d : shape) n *= d;
        return shape.empty() ? 0 : n;
    }

private:
    std::vector<int> shape_;
    std::vector<double> v_;
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double squared_norm(const std::vector<double>& a) { return dot(a, a); }

// Mean squared difference over all elements.
inline double mse(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ConfigError("mse: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    double s = 0.0;
    for (long i = 0; i < a.numel(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s / static_cast<double>(a.numel());
}

}  // namespace semjscc
