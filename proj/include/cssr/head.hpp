#pragma once

#include <string>
#include <vector>

#include "cssr/graph.hpp"

namespace cssr {

enum class HeadMode { Cssr, Rcssr, Linear, Gcpl, Rpl };
enum class ErrorNorm { Mae, Mse };
enum class PoolStrategy { SmAp, ApSm }; // pixelwise softmax then pool / pool logits then softmax

HeadMode head_mode_from_string(const std::string& s);
const char* head_mode_name(HeadMode m);
ErrorNorm error_norm_from_string(const std::string& s);
const char* error_norm_name(ErrorNorm n);
PoolStrategy strategy_from_string(const std::string& s);
const char* strategy_name(PoolStrategy s);

struct HeadConfig {
    HeadMode mode = HeadMode::Cssr;
    double gamma = 0.1;     // >0 for cssr, <0 for rcssr; unused by other modes
    ErrorNorm error_norm = ErrorNorm::Mae;
    PoolStrategy strategy = PoolStrategy::SmAp;
    int num_classes = 0;
    int latent_dim = 0;     // per-class AE embedding size
    double reg_weight = 0.1; // gcpl prototype loss / rpl margin variance weight

    void validate() const;
    bool reconstruction_mode() const { return mode == HeadMode::Cssr || mode == HeadMode::Rcssr; }
};

// One class's auto-encoder in matrix form: reconstruction is
// decoder * tanh(encoder * z), no bias terms anywhere.
struct ClassAE {
    Tensor encoder; // {k, D}
    Tensor decoder; // {D, k}

    static ClassAE random(int feature_dim, int latent_dim, Rng& rng);
};

Tensor ae_reconstruct(const Tensor& z, const ClassAE& ae);
double ae_recon_error(const Tensor& z, const ClassAE& ae, ErrorNorm norm);

// Pixelwise class probabilities from a per-pixel distance grid {H,W,m}:
// p(y=i|z) = exp(-gamma*d_i) / sum_j exp(-gamma*d_j).
Tensor pixel_probs_from_distances(const Tensor& dist, double gamma);

// Image-level probabilities per strategy ({H,W,m} distances -> {m}).
Tensor image_probs_from_distances(const Tensor& dist, double gamma, PoolStrategy strategy);

// -log p(y=label); probabilities below 1e-12 are clamped, *clamped set.
double classification_loss(const Tensor& probs, int label, bool* clamped = nullptr);

// argmax with ties broken toward the lowest index.
int argmax_lowest(const Tensor& probs);

inline constexpr double kLogFloor = 1e-12;

// Classification head over feature maps. For cssr/rcssr, one linear
// encoder/decoder pair per class applied pixelwise as 1x1 convolutions;
// for linear, a dense layer on the pooled feature; for gcpl/rpl, one
// prototype / reciprocal point per class on the pooled feature.
class Head {
public:
    Head() = default;

    void build(Graph& graph, const HeadConfig& config, int feature_dim, uint64_t seed);

    // Scalar loss node for one sample's feature-map node.
    NodeId loss(Graph& graph, NodeId feature, int label) const;

    struct Output {
        Tensor probs;        // {m}
        Tensor distances;    // {H,W,m}; reconstruction or squared point distances; empty for linear
        int predicted = -1;
    };
    Output evaluate(const Graph& graph, const Tensor& feature) const;

    // cssr/rcssr only: matrix-form view of one class's AE.
    ClassAE class_ae(const Graph& graph, int cls) const;

    const HeadConfig& config() const { return config_; }
    int feature_dim() const { return feature_dim_; }
    const std::vector<int>& param_indices() const { return params_; }

private:
    HeadConfig config_;
    int feature_dim_ = 0;
    std::vector<int> params_;
    // cssr/rcssr: params_ = enc0,dec0,enc1,dec1,...
    // linear:      params_ = W, b
    // gcpl:        params_ = proto0..proto{m-1}
    // rpl:         params_ = proto0..proto{m-1}, r0..r{m-1}
};

} // namespace cssr
