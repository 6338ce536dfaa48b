#include "cssr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cssr {

namespace {

void require_nonempty(std::span<const double> known, std::span<const double> unknown, const char* op) {
    if (known.empty()) throw ConfigError(std::string(op) + ": empty known score list");
    if (unknown.empty()) throw ConfigError(std::string(op) + ": empty unknown score list");
}

std::vector<double> sorted(std::span<const double> v) {
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    return s;
}

} // namespace

double auroc(std::span<const double> known, std::span<const double> unknown) {
    require_nonempty(known, unknown, "auroc");
    // midrank assignment over the merged list
    std::vector<std::pair<double, int>> all; // score, side (1 = known)
    all.reserve(known.size() + unknown.size());
    for (double s : known) all.push_back({s, 1});
    for (double s : unknown) all.push_back({s, 0});
    std::sort(all.begin(), all.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double rank_sum_known = 0.0;
    size_t i = 0;
    while (i < all.size()) {
        size_t j = i;
        while (j < all.size() && all[j].first == all[i].first) ++j;
        double midrank = 0.5 * static_cast<double>(i + 1 + j); // ranks are 1-based
        for (size_t t = i; t < j; ++t) {
            if (all[t].second == 1) rank_sum_known += midrank;
        }
        i = j;
    }
    double nk = static_cast<double>(known.size());
    double nu = static_cast<double>(unknown.size());
    double u = rank_sum_known - nk * (nk + 1.0) / 2.0;
    return u / (nk * nu);
}

double dtacc(std::span<const double> known, std::span<const double> unknown) {
    require_nonempty(known, unknown, "dtacc");
    std::vector<double> ks = sorted(known);
    std::vector<double> us = sorted(unknown);
    std::vector<double> all;
    all.reserve(ks.size() + us.size());
    all.insert(all.end(), ks.begin(), ks.end());
    all.insert(all.end(), us.begin(), us.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());

    std::vector<double> thresholds;
    thresholds.push_back(-std::numeric_limits<double>::infinity());
    for (size_t i = 0; i + 1 < all.size(); ++i) thresholds.push_back(0.5 * (all[i] + all[i + 1]));
    thresholds.push_back(std::numeric_limits<double>::infinity());

    double best = 0.0;
    for (double t : thresholds) {
        // accepted as known when score >= t
        auto kacc = ks.end() - std::lower_bound(ks.begin(), ks.end(), t);
        auto urej = std::lower_bound(us.begin(), us.end(), t) - us.begin();
        double tpr = static_cast<double>(kacc) / static_cast<double>(ks.size());
        double tnr = static_cast<double>(urej) / static_cast<double>(us.size());
        best = std::max(best, 0.5 * (tpr + tnr));
    }
    return best;
}

double aupr(std::span<const double> known, std::span<const double> unknown, PositiveSide positive) {
    require_nonempty(known, unknown, "aupr");
    std::vector<double> pos, neg;
    if (positive == PositiveSide::In) {
        pos.assign(known.begin(), known.end());
        neg.assign(unknown.begin(), unknown.end());
    } else {
        for (double s : unknown) pos.push_back(-s);
        for (double s : known) neg.push_back(-s);
    }
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());
    std::vector<double> all;
    all.reserve(pos.size() + neg.size());
    all.insert(all.end(), pos.begin(), pos.end());
    all.insert(all.end(), neg.begin(), neg.end());
    std::sort(all.begin(), all.end(), std::greater<>());
    all.erase(std::unique(all.begin(), all.end()), all.end());

    double np = static_cast<double>(pos.size());
    double area = 0.0;
    double prev_recall = 0.0;
    for (double t : all) { // descending thresholds; predict positive when score >= t
        double tp = static_cast<double>(pos.end() - std::lower_bound(pos.begin(), pos.end(), t));
        double fp = static_cast<double>(neg.end() - std::lower_bound(neg.begin(), neg.end(), t));
        double recall = tp / np;
        double precision = tp + fp > 0 ? tp / (tp + fp) : 1.0;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return area;
}

double fit_threshold(std::span<const double> known_scores, double tpr_target) {
    if (known_scores.empty()) throw ConfigError("fit_threshold: empty score list");
    if (tpr_target <= 0.0 || tpr_target > 1.0)
        throw ConfigError("fit_threshold: tpr_target must be in (0,1]");
    std::vector<double> s = sorted(known_scores);
    auto idx = static_cast<size_t>(std::floor((1.0 - tpr_target) * static_cast<double>(s.size())));
    if (idx >= s.size()) idx = s.size() - 1;
    return s[idx];
}

double tnr_at_tpr(std::span<const double> known, std::span<const double> unknown, double tpr) {
    require_nonempty(known, unknown, "tnr_at_tpr");
    double delta = fit_threshold(known, tpr);
    int64_t below = 0;
    for (double s : unknown) {
        if (s < delta) ++below;
    }
    return static_cast<double>(below) / static_cast<double>(unknown.size());
}

double macro_f1_open(const std::vector<ScoredSample>& samples, double threshold, int num_known) {
    if (num_known < 1) throw ConfigError("macro_f1_open: need at least one known class");
    int classes = num_known + 1; // the extra index is the unknown class
    std::vector<int64_t> tp(static_cast<size_t>(classes), 0);
    std::vector<int64_t> fp(static_cast<size_t>(classes), 0);
    std::vector<int64_t> fn(static_cast<size_t>(classes), 0);
    for (const ScoredSample& s : samples) {
        int truth = s.is_known ? s.true_label : num_known;
        int decision = s.score >= threshold ? s.predicted_label : num_known;
        if (truth < 0 || truth >= classes) throw ConfigError("macro_f1_open: label out of range");
        if (decision < 0 || decision >= classes) throw ConfigError("macro_f1_open: prediction out of range");
        if (decision == truth) {
            ++tp[static_cast<size_t>(truth)];
        } else {
            ++fp[static_cast<size_t>(decision)];
            ++fn[static_cast<size_t>(truth)];
        }
    }
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) {
        double denom = 2.0 * static_cast<double>(tp[static_cast<size_t>(c)]) +
                       static_cast<double>(fp[static_cast<size_t>(c)]) +
                       static_cast<double>(fn[static_cast<size_t>(c)]);
        sum += denom > 0 ? 2.0 * static_cast<double>(tp[static_cast<size_t>(c)]) / denom : 0.0;
    }
    return sum / static_cast<double>(classes);
}

double oscr(const std::vector<ScoredSample>& samples) {
    int64_t nk = 0, nu = 0;
    for (const ScoredSample& s : samples) (s.is_known ? nk : nu)++;
    if (nk == 0 || nu == 0) throw ConfigError("oscr: need both known and unknown samples");

    std::vector<double> thresholds;
    thresholds.reserve(samples.size());
    for (const ScoredSample& s : samples) thresholds.push_back(s.score);
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    // curve points (FPR, CCR) for delta at each distinct score and +inf
    std::vector<std::pair<double, double>> pts;
    auto point = [&](double delta) {
        int64_t correct = 0, accepted_unknown = 0;
        for (const ScoredSample& s : samples) {
            if (s.is_known) {
                if (s.score >= delta && s.predicted_label == s.true_label) ++correct;
            } else if (s.score >= delta) {
                ++accepted_unknown;
            }
        }
        pts.push_back({static_cast<double>(accepted_unknown) / static_cast<double>(nu),
                       static_cast<double>(correct) / static_cast<double>(nk)});
    };
    for (double t : thresholds) point(t);
    point(std::numeric_limits<double>::infinity());
    pts.push_back({0.0, 0.0}); // anchor
    std::sort(pts.begin(), pts.end());

    double area = 0.0;
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
        double dx = pts[i + 1].first - pts[i].first;
        area += dx * 0.5 * (pts[i].second + pts[i + 1].second);
    }
    // extend the curve at FPR=1 if the lowest threshold already accepts all
    if (pts.back().first < 1.0) area += (1.0 - pts.back().first) * pts.back().second;
    return area;
}

double openness(int n_train_classes, int n_test_classes, int n_target_classes) {
    if (n_train_classes <= 0 || n_test_classes <= 0 || n_target_classes <= 0)
        throw ConfigError("openness: class counts must be positive");
    if (n_test_classes < n_train_classes)
        throw ConfigError("openness: n_test must be >= n_train");
    return 1.0 - std::sqrt(2.0 * static_cast<double>(n_train_classes) /
                           static_cast<double>(n_test_classes + n_target_classes));
}

} // namespace cssr
