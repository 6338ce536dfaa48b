#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cssr/common.hpp"

namespace cssr {

struct ScoredSample {
    double score = 0.0;
    bool is_known = false;
    int true_label = -1;      // -1 for unknowns
    int predicted_label = -1; // closed-set prediction among known classes
};

// P(known > unknown) + 0.5 P(tie), i.e. the rank-sum statistic.
double auroc(std::span<const double> known, std::span<const double> unknown);

// max over thresholds of 0.5*(TPR + TNR); thresholds are midpoints of
// adjacent distinct scores plus the two infinities. Acceptance is score >= t.
double dtacc(std::span<const double> known, std::span<const double> unknown);

enum class PositiveSide { In, Out };

// Area under precision-recall, step interpolation at each achievable recall.
// PositiveSide::Out negates scores and swaps the sides.
double aupr(std::span<const double> known, std::span<const double> unknown, PositiveSide positive);

// Largest threshold accepting at least tpr_target of the scores: the
// floor((1-tpr)*n)-th ascending order statistic (0-indexed).
double fit_threshold(std::span<const double> known_scores, double tpr_target = 0.95);

// Fraction of unknown scores strictly below the fit_threshold of the knowns.
double tnr_at_tpr(std::span<const double> known, std::span<const double> unknown, double tpr = 0.95);

// Macro F1 over m known classes plus the unknown class. A sample's decision
// is its predicted label when score >= threshold, otherwise unknown.
// Classes absent from both truth and decisions get F1 = 0.
double macro_f1_open(const std::vector<ScoredSample>& samples, double threshold, int num_known);

// Area under the correct-classification-rate vs false-positive-rate curve,
// swept over all distinct score thresholds, trapezoidal over FPR in [0,1].
double oscr(const std::vector<ScoredSample>& samples);

// 1 - sqrt(2*n_train / (n_test + n_target)).
double openness(int n_train_classes, int n_test_classes, int n_target_classes);

struct EvalReport {
    double closed_accuracy = 0.0;
    std::optional<double> auroc;
    std::optional<double> dtacc;
    std::optional<double> auin;
    std::optional<double> auout;
    std::optional<double> tnr_at_tpr95;
    std::optional<double> macro_f1;
    std::optional<double> oscr;
    std::optional<double> openness;
    double threshold = 0.0;
    // per-score AUROC breakdown keyed by score id (s1, s2, s3, fused)
    std::vector<std::pair<std::string, double>> score_aurocs;
    int known_count = 0;
    int unknown_count = 0;
};

} // namespace cssr
