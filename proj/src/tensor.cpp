#include "cssr/tensor.hpp"

#include <cmath>
#include <sstream>

namespace cssr {

double Rng::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // u1 in (0,1] so the log is finite.
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

uint64_t mix_seed(uint64_t a, uint64_t b) {
    Rng rng(a ^ (b * 0xff51afd7ed558ccdULL) ^ 0x2545f4914f6cdd1dULL);
    rng.next_u64();
    return rng.next_u64();
}

uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c) {
    return mix_seed(mix_seed(a, b), c);
}

std::vector<int> random_permutation(int n, Rng& rng) {
    std::vector<int> p(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) p[static_cast<size_t>(i)] = i;
    for (int i = n - 1; i >= 1; --i) {
        int j = rng.uniform_int(i + 1);
        std::swap(p[static_cast<size_t>(i)], p[static_cast<size_t>(j)]);
    }
    return p;
}

int64_t shape_numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_to_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    for (int d : shape_) {
        if (d <= 0) throw ShapeError("tensor dimension must be positive, got shape " + shape_to_string(shape_));
    }
    data_.assign(static_cast<size_t>(shape_numel(shape_)), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    for (int d : shape_) {
        if (d <= 0) throw ShapeError("tensor dimension must be positive, got shape " + shape_to_string(shape_));
    }
    if (static_cast<int64_t>(data_.size()) != shape_numel(shape_)) {
        throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                         shape_to_string(shape_));
    }
}

Tensor Tensor::filled(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tensor::fill(double v) {
    for (double& x : data_) x = v;
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

void quantize_f32(Tensor& t) {
    for (double& v : t.values()) v = static_cast<double>(static_cast<float>(v));
}

Tensor uniform_init(std::vector<int> shape, int fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
}

} // namespace cssr
