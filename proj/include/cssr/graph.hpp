#pragma once

#include <string>
#include <vector>

#include "cssr/tensor.hpp"

namespace cssr {

using NodeId = int;

enum class Op {
    Constant,
    Param,
    Matmul,
    Conv2d,
    Add,
    Subtract,
    Scale,
    Tanh,
    Relu,
    Abs,
    SumReduce,
    MeanReduce,
    MaxPool2x2,
    GlobalAvgPool,
    SoftmaxChannels,
    Log,
    Multiply,
    Concat,
    Reshape, // view change only; gradient passes through untouched
};

const char* op_name(Op op);

// Reduction axis selector: whole tensor or the trailing (channel) axis.
enum class Axis { All, Last };

struct Attrs {
    double scalar = 0.0;     // Scale factor
    int stride = 1;          // Conv2d stride, 1 or 2
    Axis axis = Axis::All;   // SumReduce / MeanReduce
    double log_floor = 0.0;  // Log: inputs clamped to >= floor when > 0
    std::vector<int> shape;  // Reshape target
};

struct Node {
    Op op = Op::Constant;
    std::vector<NodeId> inputs;
    Attrs attrs;
    Tensor value;
    Tensor grad;
    int param = -1;            // parameter index for Op::Param leaves
    bool needs_grad = false;
    std::vector<int> aux;      // MaxPool2x2 argmax offsets
};

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor velocity;
};

struct GradCheckEntry {
    std::string param;
    double max_rel_error = 0.0;
    int64_t worst_index = -1;
    bool pass = true;
    std::string note; // non-finite diagnostics
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    bool pass = true;
    std::string summary() const;
};

// Tape-style reverse-mode graph. Parameters are registered once and persist;
// the tape of applied primitives is rebuilt per forward pass. backward()
// walks the tape in exact reverse creation order (reverse topological order,
// since inputs always precede uses) and accumulates gradients by addition,
// sequentially — identical inputs and parameters give bit-identical gradients.
class Graph {
public:
    explicit Graph(Precision precision = Precision::f64) : precision_(precision) {}

    Precision precision() const { return precision_; }

    // ---- parameters ----
    int add_parameter(const std::string& name, Tensor init);
    int param_count() const { return static_cast<int>(params_.size()); }
    Parameter& param(int i) { return params_[static_cast<size_t>(i)]; }
    const Parameter& param(int i) const { return params_[static_cast<size_t>(i)]; }
    int find_param(const std::string& name) const; // -1 when absent

    // ---- tape construction ----
    NodeId constant(Tensor value);
    NodeId use(int param_index);
    NodeId apply(Op op, const std::vector<NodeId>& inputs, const Attrs& attrs = {});

    NodeId matmul(NodeId a, NodeId b) { return apply(Op::Matmul, {a, b}); }
    NodeId conv2d(NodeId x, NodeId w, int stride = 1) {
        Attrs at; at.stride = stride; return apply(Op::Conv2d, {x, w}, at);
    }
    NodeId conv2d(NodeId x, NodeId w, NodeId bias, int stride) {
        Attrs at; at.stride = stride; return apply(Op::Conv2d, {x, w, bias}, at);
    }
    NodeId add(NodeId a, NodeId b) { return apply(Op::Add, {a, b}); }
    NodeId subtract(NodeId a, NodeId b) { return apply(Op::Subtract, {a, b}); }
    NodeId scale(NodeId a, double s) { Attrs at; at.scalar = s; return apply(Op::Scale, {a}, at); }
    NodeId tanh(NodeId a) { return apply(Op::Tanh, {a}); }
    NodeId relu(NodeId a) { return apply(Op::Relu, {a}); }
    NodeId abs(NodeId a) { return apply(Op::Abs, {a}); }
    NodeId sum(NodeId a, Axis axis = Axis::All) { Attrs at; at.axis = axis; return apply(Op::SumReduce, {a}, at); }
    NodeId mean(NodeId a, Axis axis = Axis::All) { Attrs at; at.axis = axis; return apply(Op::MeanReduce, {a}, at); }
    NodeId maxpool2x2(NodeId a) { return apply(Op::MaxPool2x2, {a}); }
    NodeId global_avg_pool(NodeId a) { return apply(Op::GlobalAvgPool, {a}); }
    NodeId softmax_channels(NodeId a) { return apply(Op::SoftmaxChannels, {a}); }
    NodeId log(NodeId a, double floor = 0.0) { Attrs at; at.log_floor = floor; return apply(Op::Log, {a}, at); }
    NodeId multiply(NodeId a, NodeId b) { return apply(Op::Multiply, {a, b}); }
    NodeId concat(const std::vector<NodeId>& parts) { return apply(Op::Concat, parts); }
    NodeId reshape(NodeId a, std::vector<int> shape) {
        Attrs at; at.shape = std::move(shape); return apply(Op::Reshape, {a}, at);
    }

    const Tensor& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
    const Tensor& grad(NodeId id) const { return nodes_[static_cast<size_t>(id)].grad; }
    const Node& node(NodeId id) const { return nodes_[static_cast<size_t>(id)]; }
    size_t tape_size() const { return nodes_.size(); }
    void clear_tape() {
        nodes_.clear();
        param_leaf_.assign(params_.size(), -1);
    }

    // Re-runs every tape op in creation order; Param leaves re-read the
    // parameter store, Constant leaves keep their values. Throws NumericError
    // naming the node on a non-finite intermediate.
    void recompute();

    // ---- differentiation and updates ----
    void backward(NodeId loss);
    bool gradients_ready() const { return grads_valid_; }
    void sgd_step(double lr, double momentum);

    // Central differences (step h) against analytic gradients per parameter.
    // Relative error is |a-n| / max(|a|, |n|, 1); parameters with error above
    // tolerance fail. The current tape and its loss node are reused.
    GradCheckReport grad_check(NodeId loss, double tolerance, double step = 1e-5);

private:
    Tensor eval_op(Op op, const std::vector<NodeId>& inputs, const Attrs& attrs, std::vector<int>* aux) const;
    void backprop_node(NodeId id);
    void ensure_grad(NodeId id);
    double loss_value_after_recompute(NodeId loss);

    Precision precision_;
    std::vector<Parameter> params_;
    std::vector<Node> nodes_;
    std::vector<NodeId> param_leaf_; // one leaf per parameter per tape
    bool grads_valid_ = false;
};

} // namespace cssr
