#pragma once

#include <array>
#include <string>
#include <vector>

#include "cssr/head.hpp"
#include "cssr/tensor.hpp"

namespace cssr {

enum class ScoreId : int { Recon = 0, FirstOrder = 1, Gram = 2 };
const char* score_id_name(ScoreId id);

// Calibration state for unknown detection. Built once over the training set,
// then immutable during scoring.
struct ScoreStats {
    int num_classes = 0;
    int feature_dim = 0;
    int gram_power = 8;
    std::vector<Tensor> mu;         // per class {D}, mean |activation|
    std::vector<Tensor> mu_tilde;   // per class {D}, cross-class normalized
    std::vector<Tensor> gram;       // per class {D,D} co-occurrence templates
    std::vector<uint8_t> empty_class;
    std::array<double, 3> score_mean{0.0, 0.0, 0.0};
    std::array<double, 3> score_std{0.0, 0.0, 0.0};
    std::array<double, 3> weights{1.0, 1.0, 1.0};
    double threshold = 0.0;
    bool calibrated = false;
    bool has_threshold = false;
    std::vector<std::string> warnings;
};

inline constexpr double kDegenerateScore = -1e9; // zero-norm surrogate

// Reconstruction-based score for the predicted class, averaged over pixels.
// distances is the head's {H,W,m} grid. For prototype-style heads the score
// is -d_c per pixel / ||z||_1^2 (zero norms degenerate to kDegenerateScore);
// for reciprocal heads it is d_c; linear heads use the maximum probability.
double score_recon(const Tensor& feature, const Head::Output& out, int cls, HeadMode mode,
                   bool* degenerate = nullptr);

// Mean over pixels of |z|^T mu_tilde_c.
double score_first_order(const Tensor& feature, int cls, const ScoreStats& stats);

// Feature co-occurrence matrix. power 1: F F^T over pixel columns; higher
// powers apply elementwise powers before and the matching root after.
Tensor gram_matrix(const Tensor& feature, int power);

// Sum of the elementwise product of the class template with gram_matrix(Z).
double score_gram(const Tensor& feature, int cls, const ScoreStats& stats);

struct ClassifiedFeature {
    Tensor feature; // {H,W,D}
    int predicted = -1;
};

// Statistics over non-augmented training features grouped by predicted
// class. Classes with no predicted samples fall back to a uniform mu_tilde
// row and a zero template, with a warning recorded on the result.
ScoreStats collect_class_stats(const std::vector<ClassifiedFeature>& features, int num_classes,
                               int feature_dim, int gram_power = 8);

struct RawScores {
    double s1 = 0.0, s2 = 0.0, s3 = 0.0;
    bool degenerate = false;
    double get(ScoreId id) const {
        return id == ScoreId::Recon ? s1 : id == ScoreId::FirstOrder ? s2 : s3;
    }
};

// Mean and unbiased standard deviation per score over an augmented training
// pass. A zero deviation is rejected as degenerate, naming the score.
void calibrate_scores(const std::vector<RawScores>& scores, ScoreStats& stats);

double normalized_score(double raw, ScoreId id, const ScoreStats& stats);

// w1 s~1 + w2 s~2 + w3 s~3. Requires calibrated stats.
double fused_score(const RawScores& raw, const ScoreStats& stats);

// Acceptance rule shared by every thresholded decision: known iff score >= threshold.
inline bool accept_as_known(double fused, double threshold) { return fused >= threshold; }

} // namespace cssr
