#include "cssr/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cssr/kernels.hpp"

namespace cssr {

const char* op_name(Op op) {
    switch (op) {
        case Op::Constant: return "constant";
        case Op::Param: return "parameter";
        case Op::Matmul: return "matmul";
        case Op::Conv2d: return "conv2d";
        case Op::Add: return "add";
        case Op::Subtract: return "subtract";
        case Op::Scale: return "scale";
        case Op::Tanh: return "tanh";
        case Op::Relu: return "relu";
        case Op::Abs: return "abs";
        case Op::SumReduce: return "sum-reduce";
        case Op::MeanReduce: return "mean-reduce";
        case Op::MaxPool2x2: return "max-pool2x2";
        case Op::GlobalAvgPool: return "global-average-pool";
        case Op::SoftmaxChannels: return "softmax-over-channel";
        case Op::Log: return "log";
        case Op::Multiply: return "elementwise-multiply";
        case Op::Concat: return "concat";
        case Op::Reshape: return "reshape";
    }
    return "?";
}

std::string GradCheckReport::summary() const {
    std::ostringstream os;
    for (const auto& e : entries) {
        os << (e.pass ? "pass " : "FAIL ") << e.param << "  max_rel_error=" << e.max_rel_error;
        if (!e.note.empty()) os << "  (" << e.note << ")";
        os << "\n";
    }
    os << (pass ? "gradcheck: pass" : "gradcheck: FAIL") << "\n";
    return os.str();
}

int Graph::add_parameter(const std::string& name, Tensor init) {
    if (find_param(name) >= 0) throw ConfigError("duplicate parameter name: " + name);
    if (!init.all_finite()) throw NumericError("parameter " + name + " initialized with non-finite values");
    if (precision_ == Precision::f32) quantize_f32(init);
    Parameter p;
    p.name = name;
    p.grad = Tensor(init.shape());
    p.velocity = Tensor(init.shape());
    p.value = std::move(init);
    params_.push_back(std::move(p));
    return static_cast<int>(params_.size()) - 1;
}

int Graph::find_param(const std::string& name) const {
    for (size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

NodeId Graph::constant(Tensor value) {
    if (!value.all_finite()) throw NumericError("constant input contains non-finite values");
    if (precision_ == Precision::f32) quantize_f32(value);
    Node n;
    n.op = Op::Constant;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size()) - 1;
}

NodeId Graph::use(int param_index) {
    const Parameter& p = params_.at(static_cast<size_t>(param_index));
    if (param_leaf_.size() != params_.size()) param_leaf_.resize(params_.size(), -1);
    NodeId cached = param_leaf_[static_cast<size_t>(param_index)];
    if (cached >= 0) return cached;
    if (!p.value.all_finite()) throw NumericError("parameter " + p.name + " holds non-finite values");
    Node n;
    n.op = Op::Param;
    n.param = param_index;
    n.value = p.value;
    n.needs_grad = true;
    nodes_.push_back(std::move(n));
    NodeId id = static_cast<NodeId>(nodes_.size()) - 1;
    param_leaf_[static_cast<size_t>(param_index)] = id;
    return id;
}

Tensor Graph::eval_op(Op op, const std::vector<NodeId>& inputs, const Attrs& attrs,
                      std::vector<int>* aux) const {
    auto in = [&](size_t i) -> const Tensor& { return nodes_[static_cast<size_t>(inputs[i])].value; };
    switch (op) {
        case Op::Matmul: return k_matmul(in(0), in(1));
        case Op::Conv2d:
            return k_conv2d(in(0), in(1), inputs.size() > 2 ? &in(2) : nullptr, attrs.stride);
        case Op::Add: return k_add(in(0), in(1));
        case Op::Subtract: return k_subtract(in(0), in(1));
        case Op::Multiply: return k_multiply(in(0), in(1));
        case Op::Scale: return k_scale(in(0), attrs.scalar);
        case Op::Tanh: return k_tanh(in(0));
        case Op::Relu: return k_relu(in(0));
        case Op::Abs: return k_abs(in(0));
        case Op::SumReduce: return k_sum(in(0), attrs.axis);
        case Op::MeanReduce: return k_mean(in(0), attrs.axis);
        case Op::MaxPool2x2: return k_maxpool2x2(in(0), aux);
        case Op::GlobalAvgPool: return k_global_avg_pool(in(0));
        case Op::SoftmaxChannels: return k_softmax_channels(in(0));
        case Op::Log: return k_log(in(0), attrs.log_floor);
        case Op::Concat: {
            std::vector<const Tensor*> parts;
            parts.reserve(inputs.size());
            for (NodeId id : inputs) parts.push_back(&nodes_[static_cast<size_t>(id)].value);
            return k_concat(parts);
        }
        case Op::Reshape: {
            const Tensor& x = in(0);
            if (shape_numel(attrs.shape) != x.size())
                throw ShapeError("reshape: element count mismatch, " + x.shape_str() + " -> " +
                                 shape_to_string(attrs.shape));
            return Tensor(attrs.shape, x.values());
        }
        case Op::Constant:
        case Op::Param:
            break;
    }
    throw ConfigError(std::string("cannot apply leaf op ") + op_name(op));
}

NodeId Graph::apply(Op op, const std::vector<NodeId>& inputs, const Attrs& attrs) {
    if (inputs.empty()) throw ConfigError(std::string(op_name(op)) + ": no inputs");
    for (NodeId id : inputs) {
        if (id < 0 || static_cast<size_t>(id) >= nodes_.size())
            throw ConfigError(std::string(op_name(op)) + ": input node out of range");
    }
    Node n;
    n.op = op;
    n.inputs = inputs;
    n.attrs = attrs;
    n.value = eval_op(op, inputs, attrs, &n.aux);
    if (precision_ == Precision::f32) quantize_f32(n.value);
    if (!n.value.all_finite()) {
        throw NumericError(std::string(op_name(op)) + " produced non-finite values (output shape " +
                           n.value.shape_str() + ")");
    }
    for (NodeId id : inputs) n.needs_grad = n.needs_grad || nodes_[static_cast<size_t>(id)].needs_grad;
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size()) - 1;
}

void Graph::recompute() {
    for (size_t i = 0; i < nodes_.size(); ++i) {
        Node& n = nodes_[i];
        if (n.op == Op::Constant) continue;
        if (n.op == Op::Param) {
            n.value = params_[static_cast<size_t>(n.param)].value;
            continue;
        }
        n.aux.clear();
        n.value = eval_op(n.op, n.inputs, n.attrs, &n.aux);
        if (precision_ == Precision::f32) quantize_f32(n.value);
        if (!n.value.all_finite()) {
            throw NumericError("node " + std::to_string(i) + " (" + op_name(n.op) +
                               ") produced non-finite values during recompute");
        }
    }
}

void Graph::ensure_grad(NodeId id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.grad.same_shape(n.value)) n.grad = Tensor(n.value.shape());
}

void Graph::backprop_node(NodeId id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    const Tensor& g = n.grad;
    auto input = [&](size_t i) -> Node& { return nodes_[static_cast<size_t>(n.inputs[i])]; };
    auto want = [&](size_t i) { return input(i).needs_grad; };
    auto gslot = [&](size_t i) -> Tensor& {
        ensure_grad(n.inputs[i]);
        return input(i).grad;
    };

    switch (n.op) {
        case Op::Constant:
        case Op::Param:
            return;
        case Op::Matmul: {
            const Tensor& a = input(0).value;
            const Tensor& b = input(1).value;
            int nn = a.dim(0), k = a.dim(1);
            if (b.rank() == 1) {
                if (want(0)) {
                    Tensor& da = gslot(0);
                    for (int i = 0; i < nn; ++i)
                        for (int j = 0; j < k; ++j) da[static_cast<int64_t>(i) * k + j] += g[i] * b[j];
                }
                if (want(1)) {
                    Tensor& db = gslot(1);
                    for (int i = 0; i < nn; ++i) {
                        const double* arow = a.data() + static_cast<int64_t>(i) * k;
                        for (int j = 0; j < k; ++j) db[j] += g[i] * arow[j];
                    }
                }
            } else {
                int p = b.dim(1);
                if (want(0)) {
                    Tensor& da = gslot(0);
                    for (int i = 0; i < nn; ++i)
                        for (int j = 0; j < k; ++j) {
                            const double* grow = g.data() + static_cast<int64_t>(i) * p;
                            const double* brow = b.data() + static_cast<int64_t>(j) * p;
                            double acc = 0.0;
                            for (int c = 0; c < p; ++c) acc += grow[c] * brow[c];
                            da[static_cast<int64_t>(i) * k + j] += acc;
                        }
                }
                if (want(1)) {
                    Tensor& db = gslot(1);
                    for (int i = 0; i < nn; ++i) {
                        const double* arow = a.data() + static_cast<int64_t>(i) * k;
                        const double* grow = g.data() + static_cast<int64_t>(i) * p;
                        for (int j = 0; j < k; ++j) {
                            double av = arow[j];
                            double* dbrow = db.data() + static_cast<int64_t>(j) * p;
                            for (int c = 0; c < p; ++c) dbrow[c] += av * grow[c];
                        }
                    }
                }
            }
            return;
        }
        case Op::Conv2d: {
            const Tensor& x = input(0).value;
            const Tensor& w = input(1).value;
            int h = x.dim(0), wd = x.dim(1), ci = x.dim(2);
            int kh = w.dim(0), kw = w.dim(1), co = w.dim(3);
            int pad = (kh - 1) / 2, stride = n.attrs.stride;
            int ho = n.value.dim(0), wo = n.value.dim(1);
            bool wx = want(0), ww = want(1);
            Tensor* dx = wx ? &gslot(0) : nullptr;
            Tensor* dw = ww ? &gslot(1) : nullptr;
            if (n.inputs.size() > 2 && want(2)) {
                Tensor& db = gslot(2);
                for (int pix = 0; pix < ho * wo; ++pix) {
                    const double* gp = g.data() + static_cast<int64_t>(pix) * co;
                    for (int c = 0; c < co; ++c) db[c] += gp[c];
                }
            }
            if (!wx && !ww) return;
            for (int oy = 0; oy < ho; ++oy) {
                for (int ox = 0; ox < wo; ++ox) {
                    const double* gp = g.data() + (static_cast<int64_t>(oy) * wo + ox) * co;
                    for (int ky = 0; ky < kh; ++ky) {
                        int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            int ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= wd) continue;
                            const double* xrow = x.data() + (static_cast<int64_t>(iy) * wd + ix) * ci;
                            const double* wrow = w.data() + (static_cast<int64_t>(ky) * kw + kx) * ci * co;
                            double* dxrow = wx ? dx->data() + (static_cast<int64_t>(iy) * wd + ix) * ci : nullptr;
                            double* dwrow = ww ? dw->data() + (static_cast<int64_t>(ky) * kw + kx) * ci * co : nullptr;
                            for (int c = 0; c < ci; ++c) {
                                double xv = xrow[c];
                                const double* wp = wrow + static_cast<int64_t>(c) * co;
                                double acc = 0.0;
                                if (ww) {
                                    double* dwp = dwrow + static_cast<int64_t>(c) * co;
                                    for (int oc = 0; oc < co; ++oc) {
                                        dwp[oc] += xv * gp[oc];
                                        acc += wp[oc] * gp[oc];
                                    }
                                } else {
                                    for (int oc = 0; oc < co; ++oc) acc += wp[oc] * gp[oc];
                                }
                                if (wx) dxrow[c] += acc;
                            }
                        }
                    }
                }
            }
            return;
        }
        case Op::Add: {
            for (size_t s = 0; s < 2; ++s) {
                if (!want(s)) continue;
                Tensor& d = gslot(s);
                for (int64_t i = 0; i < g.size(); ++i) d[i] += g[i];
            }
            return;
        }
        case Op::Subtract: {
            if (want(0)) {
                Tensor& d = gslot(0);
                for (int64_t i = 0; i < g.size(); ++i) d[i] += g[i];
            }
            if (want(1)) {
                Tensor& d = gslot(1);
                for (int64_t i = 0; i < g.size(); ++i) d[i] -= g[i];
            }
            return;
        }
        case Op::Multiply: {
            const Tensor& a = input(0).value;
            const Tensor& b = input(1).value;
            if (want(0)) {
                Tensor& d = gslot(0);
                for (int64_t i = 0; i < g.size(); ++i) d[i] += g[i] * b[i];
            }
            if (want(1)) {
                Tensor& d = gslot(1);
                for (int64_t i = 0; i < g.size(); ++i) d[i] += g[i] * a[i];
            }
            return;
        }
        case Op::Scale: {
            if (!want(0)) return;
            Tensor& d = gslot(0);
            for (int64_t i = 0; i < g.size(); ++i) d[i] += g[i] * n.attrs.scalar;
            return;
        }
        case Op::Tanh: {
            if (!want(0)) return;
            Tensor& d = gslot(0);
            for (int64_t i = 0; i < g.size(); ++i) {
                double t = n.value[i];
                d[i] += g[i] * (1.0 - t * t);
            }
            return;
        }
        case Op::Relu: {
            if (!want(0)) return;
            const Tensor& x = input(0).value;
            Tensor& d = gslot(0);
            for (int64_t i = 0; i < g.size(); ++i) {
                if (x[i] > 0.0) d[i] += g[i];
            }
            return;
        }
        case Op::Abs: {
            if (!want(0)) return;
            const Tensor& x = input(0).value;
            Tensor& d = gslot(0);
            // subgradient 0 at exactly zero
            for (int64_t i = 0; i < g.size(); ++i) {
                if (x[i] > 0.0) d[i] += g[i];
                else if (x[i] < 0.0) d[i] -= g[i];
            }
            return;
        }
        case Op::SumReduce: {
            if (!want(0)) return;
            const Tensor& x = input(0).value;
            Tensor& d = gslot(0);
            if (n.attrs.axis == Axis::All || x.rank() == 1) {
                double gv = g[0];
                for (int64_t i = 0; i < d.size(); ++i) d[i] += gv;
            } else {
                int c = x.dim(x.rank() - 1);
                int64_t groups = x.size() / c;
                for (int64_t grp = 0; grp < groups; ++grp) {
                    double gv = g[grp];
                    double* dp = d.data() + grp * c;
                    for (int j = 0; j < c; ++j) dp[j] += gv;
                }
            }
            return;
        }
        case Op::MeanReduce: {
            if (!want(0)) return;
            const Tensor& x = input(0).value;
            Tensor& d = gslot(0);
            if (n.attrs.axis == Axis::All || x.rank() == 1) {
                double gv = g[0] / static_cast<double>(x.size());
                for (int64_t i = 0; i < d.size(); ++i) d[i] += gv;
            } else {
                int c = x.dim(x.rank() - 1);
                int64_t groups = x.size() / c;
                for (int64_t grp = 0; grp < groups; ++grp) {
                    double gv = g[grp] / static_cast<double>(c);
                    double* dp = d.data() + grp * c;
                    for (int j = 0; j < c; ++j) dp[j] += gv;
                }
            }
            return;
        }
        case Op::MaxPool2x2: {
            if (!want(0)) return;
            Tensor& d = gslot(0);
            for (int64_t i = 0; i < g.size(); ++i) d[n.aux[static_cast<size_t>(i)]] += g[i];
            return;
        }
        case Op::GlobalAvgPool: {
            if (!want(0)) return;
            const Tensor& x = input(0).value;
            Tensor& d = gslot(0);
            int h = x.dim(0), w = x.dim(1), c = x.dim(2);
            double inv = 1.0 / static_cast<double>(h * w);
            for (int pix = 0; pix < h * w; ++pix) {
                double* dp = d.data() + static_cast<int64_t>(pix) * c;
                for (int ch = 0; ch < c; ++ch) dp[ch] += g[ch] * inv;
            }
            return;
        }
        case Op::SoftmaxChannels: {
            if (!want(0)) return;
            Tensor& d = gslot(0);
            const Tensor& y = n.value;
            int c = y.dim(y.rank() - 1);
            int64_t groups = y.size() / c;
            for (int64_t grp = 0; grp < groups; ++grp) {
                const double* yp = y.data() + grp * c;
                const double* gp = g.data() + grp * c;
                double dot = 0.0;
                for (int j = 0; j < c; ++j) dot += yp[j] * gp[j];
                double* dp = d.data() + grp * c;
                for (int j = 0; j < c; ++j) dp[j] += yp[j] * (gp[j] - dot);
            }
            return;
        }
        case Op::Log: {
            if (!want(0)) return;
            const Tensor& x = input(0).value;
            Tensor& d = gslot(0);
            double floor = n.attrs.log_floor;
            for (int64_t i = 0; i < g.size(); ++i) {
                if (floor > 0.0 && x[i] < floor) continue; // clamped region
                d[i] += g[i] / x[i];
            }
            return;
        }
        case Op::Reshape: {
            if (!want(0)) return;
            Tensor& d = gslot(0);
            for (int64_t i = 0; i < g.size(); ++i) d[i] += g[i];
            return;
        }
        case Op::Concat: {
            const Tensor& y = n.value;
            if (y.rank() == 1) {
                int off = 0;
                for (size_t s = 0; s < n.inputs.size(); ++s) {
                    int len = input(s).value.dim(0);
                    if (want(s)) {
                        Tensor& d = gslot(s);
                        for (int i = 0; i < len; ++i) d[i] += g[off + i];
                    }
                    off += len;
                }
            } else {
                int h = y.dim(0), w = y.dim(1), ctot = y.dim(2);
                int off = 0;
                for (size_t s = 0; s < n.inputs.size(); ++s) {
                    int c = input(s).value.dim(2);
                    if (want(s)) {
                        Tensor& d = gslot(s);
                        for (int pix = 0; pix < h * w; ++pix) {
                            const double* gp = g.data() + static_cast<int64_t>(pix) * ctot + off;
                            double* dp = d.data() + static_cast<int64_t>(pix) * c;
                            for (int j = 0; j < c; ++j) dp[j] += gp[j];
                        }
                    }
                    off += c;
                }
            }
            return;
        }
    }
}

void Graph::backward(NodeId loss) {
    if (loss < 0 || static_cast<size_t>(loss) >= nodes_.size())
        throw ConfigError("backward: loss node out of range");
    if (nodes_[static_cast<size_t>(loss)].value.size() != 1)
        throw ConfigError("backward: loss must be a scalar, got shape " +
                          nodes_[static_cast<size_t>(loss)].value.shape_str());
    for (Parameter& p : params_) p.grad.fill(0.0);
    for (Node& n : nodes_) {
        if (n.grad.same_shape(n.value)) n.grad.fill(0.0);
    }
    ensure_grad(loss);
    nodes_[static_cast<size_t>(loss)].grad[0] = 1.0;
    for (NodeId id = loss; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (!n.needs_grad || !n.grad.same_shape(n.value)) continue;
        if (n.op == Op::Param) {
            Tensor& pg = params_[static_cast<size_t>(n.param)].grad;
            for (int64_t i = 0; i < pg.size(); ++i) pg[i] += n.grad[i];
            continue;
        }
        backprop_node(id);
    }
    if (precision_ == Precision::f32) {
        for (Parameter& p : params_) quantize_f32(p.grad);
    }
    for (const Parameter& p : params_) {
        if (!p.grad.all_finite())
            throw NumericError("gradient of parameter " + p.name + " is non-finite");
    }
    grads_valid_ = true;
}

void Graph::sgd_step(double lr, double momentum) {
    if (!grads_valid_) throw ConfigError("sgd_step called before backward");
    if (lr <= 0.0) throw ConfigError("sgd_step: learning rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("sgd_step: momentum must be in [0,1)");
    for (Parameter& p : params_) {
        for (int64_t i = 0; i < p.value.size(); ++i) {
            p.velocity[i] = momentum * p.velocity[i] + p.grad[i];
            p.value[i] -= lr * p.velocity[i];
        }
        if (precision_ == Precision::f32) {
            quantize_f32(p.velocity);
            quantize_f32(p.value);
        }
    }
    grads_valid_ = false;
}

double Graph::loss_value_after_recompute(NodeId loss) {
    recompute();
    return nodes_[static_cast<size_t>(loss)].value[0];
}

GradCheckReport Graph::grad_check(NodeId loss, double tolerance, double step) {
    if (tolerance <= 0.0) throw ConfigError("grad_check: tolerance must be positive");
    backward(loss);
    std::vector<Tensor> analytic;
    analytic.reserve(params_.size());
    for (const Parameter& p : params_) analytic.push_back(p.grad);

    GradCheckReport report;
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        Parameter& p = params_[pi];
        GradCheckEntry entry;
        entry.param = p.name;
        for (int64_t i = 0; i < p.value.size(); ++i) {
            double saved = p.value[i];
            double numeric = 0.0;
            try {
                p.value[i] = saved + step;
                double up = loss_value_after_recompute(loss);
                p.value[i] = saved - step;
                double down = loss_value_after_recompute(loss);
                numeric = (up - down) / (2.0 * step);
            } catch (const NumericError& e) {
                p.value[i] = saved;
                recompute();
                entry.pass = false;
                entry.note = e.what();
                entry.worst_index = i;
                entry.max_rel_error = std::numeric_limits<double>::infinity();
                break;
            }
            p.value[i] = saved;
            double a = analytic[pi][i];
            double denom = std::max({std::fabs(a), std::fabs(numeric), 1.0});
            double rel = std::fabs(a - numeric) / denom;
            if (rel > entry.max_rel_error) {
                entry.max_rel_error = rel;
                entry.worst_index = i;
            }
        }
        if (entry.max_rel_error > tolerance) entry.pass = false;
        report.pass = report.pass && entry.pass;
        report.entries.push_back(std::move(entry));
    }
    recompute();
    // restore analytic gradients for the caller
    for (size_t pi = 0; pi < params_.size(); ++pi) params_[pi].grad = analytic[pi];
    grads_valid_ = true;
    return report;
}

} // namespace cssr
