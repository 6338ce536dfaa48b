#include "cssr/scoring.hpp"

#include <cmath>

namespace cssr {

const char* score_id_name(ScoreId id) {
    switch (id) {
        case ScoreId::Recon: return "s1";
        case ScoreId::FirstOrder: return "s2";
        case ScoreId::Gram: return "s3";
    }
    return "?";
}

double score_recon(const Tensor& feature, const Head::Output& out, int cls, HeadMode mode,
                   bool* degenerate) {
    if (degenerate) *degenerate = false;
    if (mode == HeadMode::Linear) return out.probs[cls];

    const Tensor& dist = out.distances;
    if (dist.rank() != 3) throw ConfigError("score_recon: head produced no distance grid");
    if (cls < 0 || cls >= dist.dim(2)) throw ConfigError("score_recon: class out of range");
    int h = dist.dim(0), w = dist.dim(1), m = dist.dim(2);

    if (mode == HeadMode::Gcpl || mode == HeadMode::Rpl) {
        // pooled-feature point distances: one "pixel"
        double d = dist[cls];
        return mode == HeadMode::Gcpl ? -d : d;
    }

    if (feature.rank() != 3 || feature.dim(0) != h || feature.dim(1) != w)
        throw ShapeError("score_recon: feature " + feature.shape_str() + " does not match distances " +
                         dist.shape_str());
    int d_dim = feature.dim(2);
    double acc = 0.0;
    for (int pix = 0; pix < h * w; ++pix) {
        double d = dist[static_cast<int64_t>(pix) * m + cls];
        if (mode == HeadMode::Rcssr) {
            acc += d;
            continue;
        }
        const double* zp = feature.data() + static_cast<int64_t>(pix) * d_dim;
        double l1 = 0.0;
        for (int j = 0; j < d_dim; ++j) l1 += std::fabs(zp[j]);
        if (l1 == 0.0) {
            acc += kDegenerateScore;
            if (degenerate) *degenerate = true;
        } else {
            acc += -d / (l1 * l1);
        }
    }
    return acc / static_cast<double>(h * w);
}

double score_first_order(const Tensor& feature, int cls, const ScoreStats& stats) {
    if (cls < 0 || cls >= stats.num_classes || stats.mu_tilde.empty())
        throw ConfigError("score_first_order: missing class statistics");
    if (feature.rank() != 3 || feature.dim(2) != stats.feature_dim)
        throw ShapeError("score_first_order: feature " + feature.shape_str() + " does not match D=" +
                         std::to_string(stats.feature_dim));
    const Tensor& w = stats.mu_tilde[static_cast<size_t>(cls)];
    int h = feature.dim(0), wd = feature.dim(1), d = feature.dim(2);
    double acc = 0.0;
    for (int pix = 0; pix < h * wd; ++pix) {
        const double* zp = feature.data() + static_cast<int64_t>(pix) * d;
        for (int j = 0; j < d; ++j) acc += std::fabs(zp[j]) * w[j];
    }
    return acc / static_cast<double>(h * wd);
}

Tensor gram_matrix(const Tensor& feature, int power) {
    if (power < 1) throw ConfigError("gram_matrix: power must be >= 1, got " + std::to_string(power));
    if (feature.rank() != 3) throw ShapeError("gram_matrix: need an HxWxD grid, got " + feature.shape_str());
    int n = feature.dim(0) * feature.dim(1), d = feature.dim(2);
    Tensor g({d, d});
    std::vector<double> col(static_cast<size_t>(d));
    for (int pix = 0; pix < n; ++pix) {
        const double* zp = feature.data() + static_cast<int64_t>(pix) * d;
        for (int j = 0; j < d; ++j) {
            double v = std::fabs(zp[j]); // activation intensity
            col[static_cast<size_t>(j)] = power == 1 ? v : std::pow(v, static_cast<double>(power));
        }
        for (int a = 0; a < d; ++a) {
            double va = col[static_cast<size_t>(a)];
            double* grow = g.data() + static_cast<int64_t>(a) * d;
            for (int b = 0; b < d; ++b) grow[b] += va * col[static_cast<size_t>(b)];
        }
    }
    if (power > 1) {
        double inv = 1.0 / static_cast<double>(power);
        for (int64_t i = 0; i < g.size(); ++i) g[i] = std::pow(g[i], inv);
    }
    return g;
}

double score_gram(const Tensor& feature, int cls, const ScoreStats& stats) {
    if (cls < 0 || cls >= stats.num_classes || stats.gram.empty())
        throw ConfigError("score_gram: missing class statistics");
    Tensor g = gram_matrix(feature, stats.gram_power);
    const Tensor& tmpl = stats.gram[static_cast<size_t>(cls)];
    if (!g.same_shape(tmpl))
        throw ShapeError("score_gram: gram " + g.shape_str() + " does not match template " + tmpl.shape_str());
    double acc = 0.0;
    for (int64_t i = 0; i < g.size(); ++i) acc += g[i] * tmpl[i];
    return acc;
}

ScoreStats collect_class_stats(const std::vector<ClassifiedFeature>& features, int num_classes,
                               int feature_dim, int gram_power) {
    if (num_classes < 1) throw ConfigError("collect_class_stats: need at least one class");
    ScoreStats stats;
    stats.num_classes = num_classes;
    stats.feature_dim = feature_dim;
    stats.gram_power = gram_power;
    stats.mu.assign(static_cast<size_t>(num_classes), Tensor({feature_dim}));
    stats.mu_tilde.assign(static_cast<size_t>(num_classes), Tensor({feature_dim}));
    stats.gram.assign(static_cast<size_t>(num_classes), Tensor({feature_dim, feature_dim}));
    stats.empty_class.assign(static_cast<size_t>(num_classes), 0);

    std::vector<int64_t> count(static_cast<size_t>(num_classes), 0);
    for (const ClassifiedFeature& cf : features) {
        if (cf.predicted < 0 || cf.predicted >= num_classes)
            throw ConfigError("collect_class_stats: predicted class out of range");
        if (cf.feature.rank() != 3 || cf.feature.dim(2) != feature_dim)
            throw ShapeError("collect_class_stats: feature " + cf.feature.shape_str());
        auto c = static_cast<size_t>(cf.predicted);
        int pixels = cf.feature.dim(0) * cf.feature.dim(1);
        Tensor& mu = stats.mu[c];
        // per-sample pixel mean of |z|, then averaged over samples below
        for (int pix = 0; pix < pixels; ++pix) {
            const double* zp = cf.feature.data() + static_cast<int64_t>(pix) * feature_dim;
            for (int j = 0; j < feature_dim; ++j) mu[j] += std::fabs(zp[j]) / static_cast<double>(pixels);
        }
        Tensor g = gram_matrix(cf.feature, gram_power);
        Tensor& acc = stats.gram[c];
        for (int64_t i = 0; i < g.size(); ++i) acc[i] += g[i];
        ++count[c];
    }
    for (int c = 0; c < num_classes; ++c) {
        auto cc = static_cast<size_t>(c);
        if (count[cc] == 0) {
            stats.empty_class[cc] = 1;
            stats.warnings.push_back("class " + std::to_string(c) +
                                     " received no predicted samples; uniform weights and zero template used");
            continue;
        }
        double inv = 1.0 / static_cast<double>(count[cc]);
        for (int64_t i = 0; i < stats.mu[cc].size(); ++i) stats.mu[cc][i] *= inv;
        for (int64_t i = 0; i < stats.gram[cc].size(); ++i) stats.gram[cc][i] *= inv;
    }
    // cross-class normalization; a feature silent in every class stays 0
    for (int j = 0; j < feature_dim; ++j) {
        double denom = 0.0;
        for (int c = 0; c < num_classes; ++c) denom += stats.mu[static_cast<size_t>(c)][j];
        for (int c = 0; c < num_classes; ++c) {
            auto cc = static_cast<size_t>(c);
            stats.mu_tilde[cc][j] = denom > 0.0 ? stats.mu[cc][j] / denom : 0.0;
        }
    }
    for (int c = 0; c < num_classes; ++c) {
        auto cc = static_cast<size_t>(c);
        if (stats.empty_class[cc]) {
            stats.mu_tilde[cc].fill(1.0 / static_cast<double>(num_classes));
            stats.gram[cc].fill(0.0);
        }
    }
    return stats;
}

void calibrate_scores(const std::vector<RawScores>& scores, ScoreStats& stats) {
    if (scores.size() < 2) throw ConfigError("calibrate_scores: need at least two score samples");
    for (ScoreId id : {ScoreId::Recon, ScoreId::FirstOrder, ScoreId::Gram}) {
        auto i = static_cast<size_t>(id);
        double mean = 0.0;
        for (const RawScores& s : scores) mean += s.get(id);
        mean /= static_cast<double>(scores.size());
        double var = 0.0;
        for (const RawScores& s : scores) {
            double d = s.get(id) - mean;
            var += d * d;
        }
        var /= static_cast<double>(scores.size() - 1);
        double sd = std::sqrt(var);
        if (sd == 0.0)
            throw ConfigError(std::string("calibrate_scores: score ") + score_id_name(id) +
                              " is constant over the calibration pass");
        stats.score_mean[i] = mean;
        stats.score_std[i] = sd;
    }
    stats.calibrated = true;
}

double normalized_score(double raw, ScoreId id, const ScoreStats& stats) {
    if (!stats.calibrated) throw ConfigError("normalized_score: stats not calibrated");
    auto i = static_cast<size_t>(id);
    return (raw - stats.score_mean[i]) / stats.score_std[i];
}

double fused_score(const RawScores& raw, const ScoreStats& stats) {
    if (!stats.calibrated) throw ConfigError("fused_score: stats not calibrated");
    return stats.weights[0] * normalized_score(raw.s1, ScoreId::Recon, stats) +
           stats.weights[1] * normalized_score(raw.s2, ScoreId::FirstOrder, stats) +
           stats.weights[2] * normalized_score(raw.s3, ScoreId::Gram, stats);
}

} // namespace cssr
