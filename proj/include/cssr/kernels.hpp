#pragma once

#include <vector>

#include "cssr/graph.hpp"
#include "cssr/tensor.hpp"

namespace cssr {

// Forward kernels shared by the tape (Graph::apply) and the tape-free
// evaluation paths. All throw ShapeError naming the offending shapes.

Tensor k_matmul(const Tensor& a, const Tensor& b);
Tensor k_conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, int stride);
Tensor k_add(const Tensor& a, const Tensor& b);
Tensor k_subtract(const Tensor& a, const Tensor& b);
Tensor k_multiply(const Tensor& a, const Tensor& b);
Tensor k_scale(const Tensor& a, double s);
Tensor k_tanh(const Tensor& a);
Tensor k_relu(const Tensor& a);
Tensor k_abs(const Tensor& a);
Tensor k_sum(const Tensor& a, Axis axis);
Tensor k_mean(const Tensor& a, Axis axis);
Tensor k_maxpool2x2(const Tensor& a, std::vector<int>* argmax);
Tensor k_global_avg_pool(const Tensor& a);
Tensor k_softmax_channels(const Tensor& a);
Tensor k_log(const Tensor& a, double floor);
Tensor k_concat(const std::vector<const Tensor*>& parts);

} // namespace cssr
