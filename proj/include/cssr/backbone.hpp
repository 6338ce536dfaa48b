#pragma once

#include <string>
#include <vector>

#include "cssr/graph.hpp"

namespace cssr {

enum class BackbonePreset { Mlp2d, SmallConv };

BackbonePreset backbone_preset_from_string(const std::string& s);
const char* backbone_preset_name(BackbonePreset p);

struct BackboneConfig {
    BackbonePreset preset = BackbonePreset::Mlp2d;
    int feature_dim = 8;   // mlp2d: 2..64; smallconv: fixed 128
    uint64_t seed = 0;

    void validate() const;
};

// Feature extractor producing the semantic feature map. mlp2d maps a 2-d
// point to a 1x1xD map through two hidden relu layers; smallconv maps an
// HxWx1 image through three conv3x3+relu+maxpool stages to H/8-ish x W/8-ish
// x128 (28x28 -> 3x3x128). Parameters are registered on a Graph owned by the
// caller; this struct keeps only their indices.
class Backbone {
public:
    Backbone() = default;

    // Registers parameters (deterministic order, init from config.seed).
    void build(Graph& graph, const BackboneConfig& config);

    // Tape path used in training. input must already be a tape node.
    NodeId forward(Graph& graph, NodeId input) const;

    // Tape-free path for inference. Pure: reads parameter values only.
    Tensor forward_eval(const Graph& graph, const Tensor& input) const;

    const BackboneConfig& config() const { return config_; }
    const std::vector<int>& param_indices() const { return params_; }
    std::vector<int> expected_input_shape(int h = 28, int w = 28) const;

private:
    void check_input(const Tensor& input) const;

    BackboneConfig config_;
    std::vector<int> params_; // weight/bias pairs per layer, in layer order
};

} // namespace cssr
