#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cssr/head.hpp"
#include "cssr/tensor.hpp"

namespace cssr {

// Point-based class models: per-class point sets with either prototype
// semantics (nearest point wins) or reciprocal semantics (otherness wins).
struct PrototypeModel {
    enum class Kind { Prototype, Reciprocal };
    Kind kind = Kind::Prototype;
    ErrorNorm norm = ErrorNorm::Mse; // distance for prototype logits
    std::vector<std::vector<Tensor>> points; // per class, each point a {D} vector
    std::vector<double> margins;             // per class, reciprocal regularizer only

    int num_classes() const { return static_cast<int>(points.size()); }
};

// SoftMax over logits -min_u ||z-u|| (squared L2 for Mse, L1 for Mae).
Tensor prototype_prob(const Tensor& z, const PrototypeModel& model, double gamma = 1.0);

// SoftMax over logits +sum_u ||z-u||_2^2.
Tensor reciprocal_prob(const Tensor& z, const PrototypeModel& model, double gamma = 1.0);

// min_u ||z-u||_2^2 over the labeled class's points.
double prototype_loss(const Tensor& z, int label, const PrototypeModel& model);

// sum_u (d(z,u) - R_label)^2 with d the squared L2 distance.
double reciprocal_reg(const Tensor& z, int label, const PrototypeModel& model);

struct MonotonicityViolation {
    int trial = 0;
    int cls = 0;
    std::vector<Tensor> prototypes;
    Tensor offset;
    double p_center = 0.0;
    double p_offset = 0.0;
};

struct MonotonicityReport {
    int trials = 0;
    int offsets_per_trial = 0;
    double gamma = 1.0;
    std::vector<MonotonicityViolation> violations;
    bool pass() const { return violations.empty(); }
    std::string to_string() const;
};

// Samples random single-point-per-class prototype configurations (m in [2,8],
// D in [1,16], distinct prototypes) and random offsets, and checks that under
// the L1 distance the class probability at the prototype is never beaten by
// any offset position (tolerance 1e-9).
MonotonicityReport check_mae_monotonicity(int trials, uint64_t seed, int offsets_per_trial = 50);

struct CounterexampleWitness {
    std::vector<Tensor> prototypes; // single point per class
    int cls = 0;
    Tensor offset;
    double p_center = 0.0;
    double p_offset = 0.0; // > p_center
    bool canonical = false;
    std::string to_string() const;
};

// Finds (U, c, eps) with p(y=c | u_c + eps) > p(y=c | u_c) under the squared
// L2 distance. The canonical 1-d configuration u = (0, 1), c = 0,
// eps = -0.5 is tried first and always succeeds.
CounterexampleWitness find_mse_counterexample(uint64_t seed);

} // namespace cssr
