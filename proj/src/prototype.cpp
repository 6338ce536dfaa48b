#include "cssr/prototype.hpp"

#include <cmath>
#include <sstream>

#include "cssr/kernels.hpp"

namespace cssr {

namespace {

double point_distance(const Tensor& z, const Tensor& u, ErrorNorm norm) {
    if (!z.same_shape(u))
        throw ShapeError("prototype distance: " + z.shape_str() + " vs " + u.shape_str());
    double acc = 0.0;
    for (int64_t i = 0; i < z.size(); ++i) {
        double d = z[i] - u[i];
        acc += norm == ErrorNorm::Mae ? std::fabs(d) : d * d;
    }
    return acc;
}

double min_class_distance(const Tensor& z, const std::vector<Tensor>& points, ErrorNorm norm) {
    if (points.empty()) throw ConfigError("prototype class has an empty point set");
    double best = point_distance(z, points[0], norm);
    for (size_t i = 1; i < points.size(); ++i) best = std::min(best, point_distance(z, points[i], norm));
    return best;
}

Tensor softmax_vec(std::vector<double> logits) {
    return k_softmax_channels(Tensor({static_cast<int>(logits.size())}, std::move(logits)));
}

std::string format_points(const std::vector<Tensor>& pts) {
    std::ostringstream os;
    for (size_t i = 0; i < pts.size(); ++i) {
        os << (i ? " " : "") << "u" << i << "=(";
        for (int64_t j = 0; j < pts[i].size(); ++j) os << (j ? "," : "") << pts[i][j];
        os << ")";
    }
    return os.str();
}

} // namespace

Tensor prototype_prob(const Tensor& z, const PrototypeModel& model, double gamma) {
    if (model.kind != PrototypeModel::Kind::Prototype)
        throw ConfigError("prototype_prob called on a reciprocal model");
    std::vector<double> logits;
    logits.reserve(model.points.size());
    for (const auto& cls : model.points) logits.push_back(-gamma * min_class_distance(z, cls, model.norm));
    return softmax_vec(std::move(logits));
}

Tensor reciprocal_prob(const Tensor& z, const PrototypeModel& model, double gamma) {
    if (model.kind != PrototypeModel::Kind::Reciprocal)
        throw ConfigError("reciprocal_prob called on a prototype model");
    std::vector<double> logits;
    logits.reserve(model.points.size());
    for (const auto& cls : model.points) {
        if (cls.empty()) throw ConfigError("reciprocal class has an empty point set");
        double acc = 0.0;
        for (const Tensor& u : cls) acc += point_distance(z, u, ErrorNorm::Mse);
        logits.push_back(gamma * acc);
    }
    return softmax_vec(std::move(logits));
}

double prototype_loss(const Tensor& z, int label, const PrototypeModel& model) {
    if (label < 0 || label >= model.num_classes())
        throw ConfigError("prototype_loss: label " + std::to_string(label) + " out of range");
    return min_class_distance(z, model.points[static_cast<size_t>(label)], ErrorNorm::Mse);
}

double reciprocal_reg(const Tensor& z, int label, const PrototypeModel& model) {
    if (label < 0 || label >= model.num_classes())
        throw ConfigError("reciprocal_reg: label " + std::to_string(label) + " out of range");
    if (model.margins.size() != model.points.size())
        throw ConfigError("reciprocal_reg: margins missing");
    double r = model.margins[static_cast<size_t>(label)];
    double acc = 0.0;
    for (const Tensor& u : model.points[static_cast<size_t>(label)]) {
        double gap = point_distance(z, u, ErrorNorm::Mse) - r;
        acc += gap * gap;
    }
    return acc;
}

std::string MonotonicityReport::to_string() const {
    std::ostringstream os;
    os << "L1 prototype monotonicity: " << trials << " trials x " << offsets_per_trial
       << " offsets, gamma=" << gamma << ": ";
    if (violations.empty()) {
        os << "no violations\n";
    } else {
        os << violations.size() << " violation(s)\n";
        for (const auto& v : violations) {
            os << "  trial " << v.trial << " class " << v.cls << " " << format_points(v.prototypes)
               << " p(center)=" << v.p_center << " p(offset)=" << v.p_offset << "\n";
        }
    }
    return os.str();
}

MonotonicityReport check_mae_monotonicity(int trials, uint64_t seed, int offsets_per_trial) {
    if (trials < 1) throw ConfigError("check_mae_monotonicity: trials must be >= 1");
    MonotonicityReport report;
    report.trials = trials;
    report.offsets_per_trial = offsets_per_trial;
    Rng rng(mix_seed(seed, 0x3a0e0fULL));
    for (int t = 0; t < trials; ++t) {
        int m = 2 + rng.uniform_int(7);  // [2,8]
        int d = 1 + rng.uniform_int(16); // [1,16]
        PrototypeModel model;
        model.kind = PrototypeModel::Kind::Prototype;
        model.norm = ErrorNorm::Mae;
        model.points.resize(static_cast<size_t>(m));
        for (int c = 0; c < m; ++c) {
            // rejection keeps prototypes distinct
            while (true) {
                Tensor u({d});
                for (int j = 0; j < d; ++j) u[j] = rng.uniform(-3, 3);
                bool dup = false;
                for (int prev = 0; prev < c; ++prev)
                    dup = dup || point_distance(u, model.points[static_cast<size_t>(prev)][0], ErrorNorm::Mse) < 1e-12;
                if (!dup) {
                    model.points[static_cast<size_t>(c)].push_back(std::move(u));
                    break;
                }
            }
        }
        for (int o = 0; o < offsets_per_trial; ++o) {
            int c = rng.uniform_int(m);
            const Tensor& center = model.points[static_cast<size_t>(c)][0];
            Tensor offset({d});
            for (int j = 0; j < d; ++j) offset[j] = rng.uniform(-4, 4);
            Tensor shifted = center;
            for (int j = 0; j < d; ++j) shifted[j] += offset[j];
            double pc = prototype_prob(center, model, report.gamma)[c];
            double po = prototype_prob(shifted, model, report.gamma)[c];
            if (pc < po - 1e-9) {
                MonotonicityViolation v;
                v.trial = t;
                v.cls = c;
                for (const auto& cls : model.points) v.prototypes.push_back(cls[0]);
                v.offset = offset;
                v.p_center = pc;
                v.p_offset = po;
                report.violations.push_back(std::move(v));
            }
        }
    }
    return report;
}

std::string CounterexampleWitness::to_string() const {
    std::ostringstream os;
    os << "squared-L2 prototype counterexample" << (canonical ? " (canonical)" : "") << ": "
       << format_points(prototypes) << " class " << cls << " offset=(";
    for (int64_t j = 0; j < offset.size(); ++j) os << (j ? "," : "") << offset[j];
    os << ") p(center)=" << p_center << " < p(offset)=" << p_offset << "\n";
    return os.str();
}

CounterexampleWitness find_mse_counterexample(uint64_t seed) {
    auto attempt = [](const std::vector<Tensor>& protos, int c, const Tensor& eps)
        -> std::optional<CounterexampleWitness> {
        PrototypeModel model;
        model.kind = PrototypeModel::Kind::Prototype;
        model.norm = ErrorNorm::Mse;
        for (const Tensor& u : protos) model.points.push_back({u});
        const Tensor& center = protos[static_cast<size_t>(c)];
        Tensor shifted = center;
        for (int64_t j = 0; j < eps.size(); ++j) shifted[j] += eps[j];
        double pc = prototype_prob(center, model)[c];
        double po = prototype_prob(shifted, model)[c];
        if (po > pc + 1e-12) {
            CounterexampleWitness w;
            w.prototypes = protos;
            w.cls = c;
            w.offset = eps;
            w.p_center = pc;
            w.p_offset = po;
            return w;
        }
        return std::nullopt;
    };

    // canonical 1-d case: u = (0, 1), c = 0, eps = -0.5
    {
        std::vector<Tensor> protos{Tensor({1}, {0.0}), Tensor({1}, {1.0})};
        auto w = attempt(protos, 0, Tensor({1}, {-0.5}));
        if (w) {
            w->canonical = true;
            return *w;
        }
    }
    Rng rng(mix_seed(seed, 0xc0e4ULL));
    for (int t = 0; t < 100; ++t) {
        int d = 1 + rng.uniform_int(2);
        int m = 2 + rng.uniform_int(3);
        std::vector<Tensor> protos;
        for (int c = 0; c < m; ++c) {
            Tensor u({d});
            for (int j = 0; j < d; ++j) u[j] = rng.uniform(-2, 2);
            protos.push_back(std::move(u));
        }
        int c = rng.uniform_int(m);
        Tensor eps({d});
        for (int j = 0; j < d; ++j) eps[j] = rng.uniform(-1.5, 1.5);
        auto w = attempt(protos, c, eps);
        if (w) return *w;
    }
    throw Error("mse counterexample search exhausted; canonical case unexpectedly failed");
}

} // namespace cssr
