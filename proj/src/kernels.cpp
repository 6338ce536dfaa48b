#include "cssr/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace cssr {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw ShapeError(msg);
}

std::string two(const Tensor& a, const Tensor& b) {
    return a.shape_str() + " vs " + b.shape_str();
}

} // namespace

Tensor k_matmul(const Tensor& a, const Tensor& b) {
    require(a.rank() == 2, "matmul: left operand must be rank 2, got " + a.shape_str());
    int n = a.dim(0), k = a.dim(1);
    if (b.rank() == 1) {
        require(b.dim(0) == k, "matmul: inner dimensions differ, " + two(a, b));
        Tensor out({n});
        for (int i = 0; i < n; ++i) {
            const double* row = a.data() + static_cast<int64_t>(i) * k;
            double acc = 0.0;
            for (int j = 0; j < k; ++j) acc += row[j] * b[j];
            out[i] = acc;
        }
        return out;
    }
    require(b.rank() == 2 && b.dim(0) == k, "matmul: inner dimensions differ, " + two(a, b));
    int p = b.dim(1);
    Tensor out({n, p});
    for (int i = 0; i < n; ++i) {
        const double* arow = a.data() + static_cast<int64_t>(i) * k;
        double* orow = out.data() + static_cast<int64_t>(i) * p;
        for (int j = 0; j < k; ++j) {
            double av = arow[j];
            const double* brow = b.data() + static_cast<int64_t>(j) * p;
            for (int c = 0; c < p; ++c) orow[c] += av * brow[c];
        }
    }
    return out;
}

Tensor k_conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, int stride) {
    require(x.rank() == 3, "conv2d: input must be rank-3 HxWxC, got " + x.shape_str());
    require(w.rank() == 4, "conv2d: weight must be rank-4 khxkwxCixCo, got " + w.shape_str());
    int h = x.dim(0), wd = x.dim(1), ci = x.dim(2);
    int kh = w.dim(0), kw = w.dim(1), co = w.dim(3);
    require(kh == kw && (kh == 1 || kh == 3), "conv2d: kernel must be 1x1 or 3x3, got " + w.shape_str());
    require(w.dim(2) == ci, "conv2d: channel mismatch, input " + x.shape_str() + " weight " + w.shape_str());
    require(stride == 1 || stride == 2, "conv2d: stride must be 1 or 2, got " + std::to_string(stride));
    if (bias) {
        require(bias->rank() == 1 && bias->dim(0) == co,
                "conv2d: bias must be [" + std::to_string(co) + "], got " + bias->shape_str());
    }
    int pad = (kh - 1) / 2;
    int ho = (h + 2 * pad - kh) / stride + 1;
    int wo = (wd + 2 * pad - kw) / stride + 1;
    Tensor out({ho, wo, co});
    for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
            double* optr = out.data() + (static_cast<int64_t>(oy) * wo + ox) * co;
            if (bias) {
                const double* bp = bias->data();
                for (int c = 0; c < co; ++c) optr[c] = bp[c];
            }
            for (int ky = 0; ky < kh; ++ky) {
                int iy = oy * stride - pad + ky;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < kw; ++kx) {
                    int ix = ox * stride - pad + kx;
                    if (ix < 0 || ix >= wd) continue;
                    const double* xrow = x.data() + (static_cast<int64_t>(iy) * wd + ix) * ci;
                    const double* wrow = w.data() + (static_cast<int64_t>(ky) * kw + kx) * ci * co;
                    for (int c = 0; c < ci; ++c) {
                        double xv = xrow[c];
                        const double* wp = wrow + static_cast<int64_t>(c) * co;
                        for (int oc = 0; oc < co; ++oc) optr[oc] += xv * wp[oc];
                    }
                }
            }
        }
    }
    return out;
}

Tensor k_add(const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "add: shape mismatch, " + two(a, b));
    Tensor out = a;
    for (int64_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

Tensor k_subtract(const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "subtract: shape mismatch, " + two(a, b));
    Tensor out = a;
    for (int64_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

Tensor k_multiply(const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "elementwise-multiply: shape mismatch, " + two(a, b));
    Tensor out = a;
    for (int64_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

Tensor k_scale(const Tensor& a, double s) {
    Tensor out = a;
    for (int64_t i = 0; i < out.size(); ++i) out[i] *= s;
    return out;
}

Tensor k_tanh(const Tensor& a) {
    Tensor out = a;
    for (int64_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
    return out;
}

Tensor k_relu(const Tensor& a) {
    Tensor out = a;
    for (int64_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    return out;
}

Tensor k_abs(const Tensor& a) {
    Tensor out = a;
    for (int64_t i = 0; i < out.size(); ++i) out[i] = std::fabs(out[i]);
    return out;
}

Tensor k_sum(const Tensor& a, Axis axis) {
    if (axis == Axis::All || a.rank() == 1) {
        double acc = 0.0;
        for (int64_t i = 0; i < a.size(); ++i) acc += a[i];
        return Tensor::scalar(acc);
    }
    // Axis::Last, keepdim: [... , C] -> [... , 1]
    std::vector<int> oshape = a.shape();
    int c = oshape.back();
    oshape.back() = 1;
    Tensor out(oshape);
    int64_t groups = a.size() / c;
    for (int64_t g = 0; g < groups; ++g) {
        const double* p = a.data() + g * c;
        double acc = 0.0;
        for (int j = 0; j < c; ++j) acc += p[j];
        out[g] = acc;
    }
    return out;
}

Tensor k_mean(const Tensor& a, Axis axis) {
    int64_t count = (axis == Axis::All || a.rank() == 1) ? a.size() : a.dim(a.rank() - 1);
    Tensor out = k_sum(a, axis);
    for (int64_t i = 0; i < out.size(); ++i) out[i] /= static_cast<double>(count);
    return out;
}

Tensor k_maxpool2x2(const Tensor& a, std::vector<int>* argmax) {
    require(a.rank() == 3, "max-pool2x2: input must be rank-3 HxWxC, got " + a.shape_str());
    int h = a.dim(0), w = a.dim(1), c = a.dim(2);
    int ho = h / 2, wo = w / 2;
    require(ho >= 1 && wo >= 1, "max-pool2x2: input too small, " + a.shape_str());
    Tensor out({ho, wo, c});
    if (argmax) argmax->assign(static_cast<size_t>(out.size()), -1);
    for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
            for (int ch = 0; ch < c; ++ch) {
                double best = -1e300;
                int besti = -1;
                for (int dy = 0; dy < 2; ++dy) {
                    for (int dx = 0; dx < 2; ++dx) {
                        int idx = ((oy * 2 + dy) * w + (ox * 2 + dx)) * c + ch;
                        double v = a[idx];
                        if (v > best) { best = v; besti = idx; }
                    }
                }
                int oidx = (oy * wo + ox) * c + ch;
                out[oidx] = best;
                if (argmax) (*argmax)[static_cast<size_t>(oidx)] = besti;
            }
        }
    }
    return out;
}

Tensor k_global_avg_pool(const Tensor& a) {
    require(a.rank() == 3, "global-average-pool: input must be rank-3 HxWxC, got " + a.shape_str());
    int h = a.dim(0), w = a.dim(1), c = a.dim(2);
    Tensor out({c});
    for (int i = 0; i < h * w; ++i) {
        const double* p = a.data() + static_cast<int64_t>(i) * c;
        for (int ch = 0; ch < c; ++ch) out[ch] += p[ch];
    }
    double inv = 1.0 / static_cast<double>(h * w);
    for (int ch = 0; ch < c; ++ch) out[ch] *= inv;
    return out;
}

Tensor k_softmax_channels(const Tensor& a) {
    require(a.rank() == 3 || a.rank() == 1,
            "softmax-over-channel: input must be rank-1 or rank-3, got " + a.shape_str());
    int c = a.dim(a.rank() - 1);
    int64_t groups = a.size() / c;
    Tensor out = a;
    for (int64_t g = 0; g < groups; ++g) {
        double* p = out.data() + g * c;
        double mx = p[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, p[j]);
        double z = 0.0;
        for (int j = 0; j < c; ++j) {
            p[j] = std::exp(p[j] - mx);
            z += p[j];
        }
        for (int j = 0; j < c; ++j) p[j] /= z;
    }
    return out;
}

Tensor k_log(const Tensor& a, double floor) {
    Tensor out = a;
    for (int64_t i = 0; i < out.size(); ++i) {
        double v = out[i];
        if (floor > 0.0 && v < floor) v = floor;
        out[i] = std::log(v);
    }
    return out;
}

Tensor k_concat(const std::vector<const Tensor*>& parts) {
    require(!parts.empty(), "concat: no inputs");
    const Tensor& first = *parts.front();
    require(first.rank() == 1 || first.rank() == 3, "concat: inputs must be rank-1 or rank-3, got " + first.shape_str());
    if (first.rank() == 1) {
        int total = 0;
        for (const Tensor* t : parts) {
            require(t->rank() == 1, "concat: rank mismatch, " + two(first, *t));
            total += t->dim(0);
        }
        Tensor out({total});
        int off = 0;
        for (const Tensor* t : parts) {
            for (int i = 0; i < t->dim(0); ++i) out[off + i] = (*t)[i];
            off += t->dim(0);
        }
        return out;
    }
    int h = first.dim(0), w = first.dim(1);
    int ctot = 0;
    for (const Tensor* t : parts) {
        require(t->rank() == 3 && t->dim(0) == h && t->dim(1) == w,
                "concat: spatial shape mismatch, " + two(first, *t));
        ctot += t->dim(2);
    }
    Tensor out({h, w, ctot});
    for (int pix = 0; pix < h * w; ++pix) {
        double* optr = out.data() + static_cast<int64_t>(pix) * ctot;
        int off = 0;
        for (const Tensor* t : parts) {
            int c = t->dim(2);
            const double* p = t->data() + static_cast<int64_t>(pix) * c;
            for (int j = 0; j < c; ++j) optr[off + j] = p[j];
            off += c;
        }
    }
    return out;
}

} // namespace cssr
