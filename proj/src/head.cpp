#include "cssr/head.hpp"

#include <cmath>

#include "cssr/kernels.hpp"

namespace cssr {

HeadMode head_mode_from_string(const std::string& s) {
    if (s == "cssr") return HeadMode::Cssr;
    if (s == "rcssr") return HeadMode::Rcssr;
    if (s == "linear") return HeadMode::Linear;
    if (s == "gcpl") return HeadMode::Gcpl;
    if (s == "rpl") return HeadMode::Rpl;
    throw ConfigError("unknown head mode: " + s);
}

const char* head_mode_name(HeadMode m) {
    switch (m) {
        case HeadMode::Cssr: return "cssr";
        case HeadMode::Rcssr: return "rcssr";
        case HeadMode::Linear: return "linear";
        case HeadMode::Gcpl: return "gcpl";
        case HeadMode::Rpl: return "rpl";
    }
    return "?";
}

ErrorNorm error_norm_from_string(const std::string& s) {
    if (s == "mae") return ErrorNorm::Mae;
    if (s == "mse") return ErrorNorm::Mse;
    throw ConfigError("unknown error norm: " + s);
}

const char* error_norm_name(ErrorNorm n) { return n == ErrorNorm::Mae ? "mae" : "mse"; }

PoolStrategy strategy_from_string(const std::string& s) {
    if (s == "sm-ap") return PoolStrategy::SmAp;
    if (s == "ap-sm") return PoolStrategy::ApSm;
    throw ConfigError("unknown strategy: " + s);
}

const char* strategy_name(PoolStrategy s) { return s == PoolStrategy::SmAp ? "sm-ap" : "ap-sm"; }

void HeadConfig::validate() const {
    if (num_classes < 2) throw ConfigError("head needs at least 2 classes, got " + std::to_string(num_classes));
    if (reconstruction_mode()) {
        if (gamma == 0.0) throw ConfigError("gamma must be nonzero");
        if (mode == HeadMode::Cssr && gamma < 0.0)
            throw ConfigError("cssr requires gamma > 0, got " + std::to_string(gamma));
        if (mode == HeadMode::Rcssr && gamma > 0.0)
            throw ConfigError("rcssr requires gamma < 0, got " + std::to_string(gamma));
        if (latent_dim < 1) throw ConfigError("latent_dim must be positive");
    }
}

ClassAE ClassAE::random(int feature_dim, int latent_dim, Rng& rng) {
    ClassAE ae;
    ae.encoder = uniform_init({latent_dim, feature_dim}, feature_dim, rng);
    ae.decoder = uniform_init({feature_dim, latent_dim}, latent_dim, rng);
    return ae;
}

Tensor ae_reconstruct(const Tensor& z, const ClassAE& ae) {
    if (z.rank() != 1 || z.dim(0) != ae.encoder.dim(1))
        throw ShapeError("reconstruct: feature " + z.shape_str() + " does not match encoder " +
                         ae.encoder.shape_str());
    return k_matmul(ae.decoder, k_tanh(k_matmul(ae.encoder, z)));
}

double ae_recon_error(const Tensor& z, const ClassAE& ae, ErrorNorm norm) {
    Tensor rec = ae_reconstruct(z, ae);
    double acc = 0.0;
    for (int64_t i = 0; i < z.size(); ++i) {
        double d = z[i] - rec[i];
        acc += norm == ErrorNorm::Mae ? std::fabs(d) : d * d;
    }
    return acc;
}

Tensor pixel_probs_from_distances(const Tensor& dist, double gamma) {
    if (dist.rank() != 3) throw ShapeError("pixel probabilities need an HxWxm grid, got " + dist.shape_str());
    if (!dist.all_finite()) throw NumericError("non-finite reconstruction errors");
    return k_softmax_channels(k_scale(dist, -gamma));
}

Tensor image_probs_from_distances(const Tensor& dist, double gamma, PoolStrategy strategy) {
    if (dist.rank() != 3 || dist.size() == 0)
        throw ShapeError("image probabilities need a nonempty HxWxm grid, got " + dist.shape_str());
    if (strategy == PoolStrategy::SmAp) {
        return k_global_avg_pool(pixel_probs_from_distances(dist, gamma));
    }
    Tensor pooled = k_global_avg_pool(k_scale(dist, -gamma));
    return k_softmax_channels(pooled);
}

double classification_loss(const Tensor& probs, int label, bool* clamped) {
    if (label < 0 || label >= probs.dim(0))
        throw ConfigError("label " + std::to_string(label) + " out of range for " + probs.shape_str());
    double p = probs[label];
    bool clip = p < kLogFloor;
    if (clamped) *clamped = clip;
    return -std::log(clip ? kLogFloor : p);
}

int argmax_lowest(const Tensor& probs) {
    int best = 0;
    for (int i = 1; i < probs.dim(0); ++i) {
        if (probs[i] > probs[best]) best = i;
    }
    return best;
}

void Head::build(Graph& graph, const HeadConfig& config, int feature_dim, uint64_t seed) {
    config.validate();
    config_ = config;
    feature_dim_ = feature_dim;
    params_.clear();
    Rng rng(mix_seed(seed, 0x4eadULL));
    int m = config.num_classes;
    switch (config.mode) {
        case HeadMode::Cssr:
        case HeadMode::Rcssr: {
            int k = config.latent_dim;
            for (int i = 0; i < m; ++i) {
                // conv view of the encoder/decoder matrices; no bias terms
                params_.push_back(graph.add_parameter("head.enc" + std::to_string(i),
                                                      uniform_init({1, 1, feature_dim, k}, feature_dim, rng)));
                params_.push_back(graph.add_parameter("head.dec" + std::to_string(i),
                                                      uniform_init({1, 1, k, feature_dim}, k, rng)));
            }
            break;
        }
        case HeadMode::Linear: {
            params_.push_back(graph.add_parameter("head.w", uniform_init({m, feature_dim}, feature_dim, rng)));
            params_.push_back(graph.add_parameter("head.b", Tensor({m})));
            break;
        }
        case HeadMode::Gcpl:
        case HeadMode::Rpl: {
            for (int i = 0; i < m; ++i) {
                params_.push_back(graph.add_parameter("head.proto" + std::to_string(i),
                                                      uniform_init({feature_dim}, feature_dim, rng)));
            }
            if (config.mode == HeadMode::Rpl) {
                for (int i = 0; i < m; ++i) {
                    params_.push_back(graph.add_parameter("head.r" + std::to_string(i),
                                                          Tensor({1}, {1.0})));
                }
            }
            break;
        }
    }
}

NodeId Head::loss(Graph& g, NodeId feature, int label) const {
    int m = config_.num_classes;
    if (label < 0 || label >= m) throw ConfigError("label " + std::to_string(label) + " out of range");
    Tensor onehot({m});
    onehot[label] = 1.0;

    switch (config_.mode) {
        case HeadMode::Cssr:
        case HeadMode::Rcssr: {
            std::vector<NodeId> dmaps;
            dmaps.reserve(static_cast<size_t>(m));
            for (int i = 0; i < m; ++i) {
                NodeId enc = g.conv2d(feature, g.use(params_[static_cast<size_t>(2 * i)]));
                NodeId rec = g.conv2d(g.tanh(enc), g.use(params_[static_cast<size_t>(2 * i + 1)]));
                NodeId diff = g.subtract(feature, rec);
                NodeId err = config_.error_norm == ErrorNorm::Mae ? g.abs(diff) : g.multiply(diff, diff);
                dmaps.push_back(g.sum(err, Axis::Last)); // {H,W,1}
            }
            NodeId dist = g.concat(dmaps);                 // {H,W,m}
            NodeId logits = g.scale(dist, -config_.gamma);
            NodeId probs = config_.strategy == PoolStrategy::SmAp
                               ? g.global_avg_pool(g.softmax_channels(logits))
                               : g.softmax_channels(g.global_avg_pool(logits));
            NodeId p_true = g.sum(g.multiply(probs, g.constant(std::move(onehot))));
            return g.scale(g.log(p_true, kLogFloor), -1.0);
        }
        case HeadMode::Linear: {
            NodeId pooled = g.global_avg_pool(feature);
            NodeId logits = g.add(g.matmul(g.use(params_[0]), pooled), g.use(params_[1]));
            NodeId probs = g.softmax_channels(logits);
            NodeId p_true = g.sum(g.multiply(probs, g.constant(std::move(onehot))));
            return g.scale(g.log(p_true, kLogFloor), -1.0);
        }
        case HeadMode::Gcpl:
        case HeadMode::Rpl: {
            NodeId pooled = g.global_avg_pool(feature);
            std::vector<NodeId> ds;
            ds.reserve(static_cast<size_t>(m));
            for (int i = 0; i < m; ++i) {
                NodeId diff = g.subtract(pooled, g.use(params_[static_cast<size_t>(i)]));
                ds.push_back(g.sum(g.multiply(diff, diff))); // squared L2, {1}
            }
            NodeId dvec = g.concat(ds); // {m}
            NodeId logits = config_.mode == HeadMode::Gcpl ? g.scale(dvec, -1.0) : dvec;
            NodeId probs = g.softmax_channels(logits);
            NodeId p_true = g.sum(g.multiply(probs, g.constant(std::move(onehot))));
            NodeId ce = g.scale(g.log(p_true, kLogFloor), -1.0);
            if (config_.reg_weight == 0.0) return ce;
            if (config_.mode == HeadMode::Gcpl) {
                return g.add(ce, g.scale(ds[static_cast<size_t>(label)], config_.reg_weight));
            }
            NodeId rmargin = g.use(params_[static_cast<size_t>(m + label)]);
            NodeId gap = g.subtract(ds[static_cast<size_t>(label)], rmargin);
            return g.add(ce, g.scale(g.multiply(gap, gap), config_.reg_weight));
        }
    }
    throw ConfigError("unreachable head mode");
}

Head::Output Head::evaluate(const Graph& g, const Tensor& feature) const {
    if (feature.rank() != 3 || feature.dim(2) != feature_dim_)
        throw ShapeError("head expects HxWx" + std::to_string(feature_dim_) + " features, got " +
                         feature.shape_str());
    int m = config_.num_classes;
    Output out;
    auto pv = [&](size_t i) -> const Tensor& { return g.param(params_[i]).value; };

    switch (config_.mode) {
        case HeadMode::Cssr:
        case HeadMode::Rcssr: {
            int h = feature.dim(0), w = feature.dim(1);
            Tensor dist({h, w, m});
            for (int i = 0; i < m; ++i) {
                Tensor rec = k_conv2d(k_tanh(k_conv2d(feature, pv(static_cast<size_t>(2 * i)), nullptr, 1)),
                                      pv(static_cast<size_t>(2 * i + 1)), nullptr, 1);
                for (int pix = 0; pix < h * w; ++pix) {
                    const double* zp = feature.data() + static_cast<int64_t>(pix) * feature_dim_;
                    const double* rp = rec.data() + static_cast<int64_t>(pix) * feature_dim_;
                    double acc = 0.0;
                    if (config_.error_norm == ErrorNorm::Mae) {
                        for (int d = 0; d < feature_dim_; ++d) acc += std::fabs(zp[d] - rp[d]);
                    } else {
                        for (int d = 0; d < feature_dim_; ++d) {
                            double dd = zp[d] - rp[d];
                            acc += dd * dd;
                        }
                    }
                    dist[static_cast<int64_t>(pix) * m + i] = acc;
                }
            }
            out.probs = image_probs_from_distances(dist, config_.gamma, config_.strategy);
            out.distances = std::move(dist);
            break;
        }
        case HeadMode::Linear: {
            Tensor pooled = k_global_avg_pool(feature);
            Tensor logits = k_add(k_matmul(pv(0), pooled), pv(1));
            out.probs = k_softmax_channels(logits);
            break;
        }
        case HeadMode::Gcpl:
        case HeadMode::Rpl: {
            Tensor pooled = k_global_avg_pool(feature);
            Tensor dist({1, 1, m});
            for (int i = 0; i < m; ++i) {
                const Tensor& u = pv(static_cast<size_t>(i));
                double acc = 0.0;
                for (int d = 0; d < feature_dim_; ++d) {
                    double dd = pooled[d] - u[d];
                    acc += dd * dd;
                }
                dist[i] = acc;
            }
            Tensor logits = k_scale(Tensor({m}, dist.values()), config_.mode == HeadMode::Gcpl ? -1.0 : 1.0);
            out.probs = k_softmax_channels(logits);
            out.distances = std::move(dist);
            break;
        }
    }
    out.predicted = argmax_lowest(out.probs);
    return out;
}

ClassAE Head::class_ae(const Graph& g, int cls) const {
    if (!config_.reconstruction_mode()) throw ConfigError("class_ae: head has no auto-encoders");
    if (cls < 0 || cls >= config_.num_classes) throw ConfigError("class_ae: class out of range");
    const Tensor& enc = g.param(params_[static_cast<size_t>(2 * cls)]).value;     // {1,1,D,k}
    const Tensor& dec = g.param(params_[static_cast<size_t>(2 * cls + 1)]).value; // {1,1,k,D}
    int d = enc.dim(2), k = enc.dim(3);
    ClassAE ae;
    ae.encoder = Tensor({k, d});
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < k; ++j) ae.encoder[static_cast<int64_t>(j) * d + i] = enc[static_cast<int64_t>(i) * k + j];
    ae.decoder = Tensor({d, k});
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < d; ++j) ae.decoder[static_cast<int64_t>(j) * k + i] = dec[static_cast<int64_t>(i) * d + j];
    return ae;
}

} // namespace cssr
