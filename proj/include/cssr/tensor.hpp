#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cssr/common.hpp"

namespace cssr {

// Dense row-major real tensor. Storage is always double; Precision::f32
// pipelines quantize values in place after each operation.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor filled(std::vector<int> shape, double v);

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // Rank-3 (H,W,C) accessors.
    double& at(int y, int x, int c) {
        return data_[static_cast<size_t>((y * shape_[1] + x) * shape_[2] + c)];
    }
    double at(int y, int x, int c) const {
        return data_[static_cast<size_t>((y * shape_[1] + x) * shape_[2] + c)];
    }
    std::span<const double> pixel(int y, int x) const {
        return {data_.data() + static_cast<size_t>((y * shape_[1] + x) * shape_[2]),
                static_cast<size_t>(shape_[2])};
    }
    std::span<double> pixel(int y, int x) {
        return {data_.data() + static_cast<size_t>((y * shape_[1] + x) * shape_[2]),
                static_cast<size_t>(shape_[2])};
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;
    void fill(double v);

    std::string shape_str() const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

int64_t shape_numel(const std::vector<int>& shape);
std::string shape_to_string(const std::vector<int>& shape);

// Rounds every element to the nearest IEEE binary32 value.
void quantize_f32(Tensor& t);

// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
Tensor uniform_init(std::vector<int> shape, int fan_in, Rng& rng);

} // namespace cssr
