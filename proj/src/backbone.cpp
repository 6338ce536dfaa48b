#include "cssr/backbone.hpp"

#include "cssr/kernels.hpp"

namespace cssr {

BackbonePreset backbone_preset_from_string(const std::string& s) {
    if (s == "mlp2d") return BackbonePreset::Mlp2d;
    if (s == "smallconv") return BackbonePreset::SmallConv;
    throw ConfigError("unknown backbone preset: " + s);
}

const char* backbone_preset_name(BackbonePreset p) {
    return p == BackbonePreset::Mlp2d ? "mlp2d" : "smallconv";
}

void BackboneConfig::validate() const {
    if (preset == BackbonePreset::Mlp2d) {
        if (feature_dim < 2 || feature_dim > 64)
            throw ConfigError("mlp2d feature_dim must be in [2,64], got " + std::to_string(feature_dim));
    } else {
        if (feature_dim != 128)
            throw ConfigError("smallconv feature_dim is fixed at 128, got " + std::to_string(feature_dim));
    }
}

void Backbone::build(Graph& graph, const BackboneConfig& config) {
    config.validate();
    config_ = config;
    params_.clear();
    Rng rng(mix_seed(config.seed, 0xbac0b0deULL));
    if (config.preset == BackbonePreset::Mlp2d) {
        const int hidden = 64;
        int d = config.feature_dim;
        params_.push_back(graph.add_parameter("backbone.w1", uniform_init({hidden, 2}, 2, rng)));
        params_.push_back(graph.add_parameter("backbone.b1", Tensor({hidden})));
        params_.push_back(graph.add_parameter("backbone.w2", uniform_init({hidden, hidden}, hidden, rng)));
        params_.push_back(graph.add_parameter("backbone.b2", Tensor({hidden})));
        params_.push_back(graph.add_parameter("backbone.w3", uniform_init({d, hidden}, hidden, rng)));
        params_.push_back(graph.add_parameter("backbone.b3", Tensor({d})));
    } else {
        const int c1 = 32, c2 = 64, c3 = 128;
        params_.push_back(graph.add_parameter("backbone.conv1.w", uniform_init({3, 3, 1, c1}, 9, rng)));
        params_.push_back(graph.add_parameter("backbone.conv1.b", Tensor({c1})));
        params_.push_back(graph.add_parameter("backbone.conv2.w", uniform_init({3, 3, c1, c2}, 9 * c1, rng)));
        params_.push_back(graph.add_parameter("backbone.conv2.b", Tensor({c2})));
        params_.push_back(graph.add_parameter("backbone.conv3.w", uniform_init({3, 3, c2, c3}, 9 * c2, rng)));
        params_.push_back(graph.add_parameter("backbone.conv3.b", Tensor({c3})));
    }
}

void Backbone::check_input(const Tensor& input) const {
    if (config_.preset == BackbonePreset::Mlp2d) {
        if (input.rank() != 1 || input.dim(0) != 2)
            throw ShapeError("mlp2d expects a 2-vector input, got " + input.shape_str());
    } else {
        if (input.rank() != 3 || input.dim(2) != 1)
            throw ShapeError("smallconv expects an HxWx1 image, got " + input.shape_str());
        if (input.dim(0) < 8 || input.dim(1) < 8)
            throw ShapeError("smallconv input too small for three pooling stages, got " + input.shape_str());
    }
}

NodeId Backbone::forward(Graph& graph, NodeId input) const {
    check_input(graph.value(input));
    if (config_.preset == BackbonePreset::Mlp2d) {
        NodeId h1 = graph.relu(graph.add(graph.matmul(graph.use(params_[0]), input), graph.use(params_[1])));
        NodeId h2 = graph.relu(graph.add(graph.matmul(graph.use(params_[2]), h1), graph.use(params_[3])));
        NodeId out = graph.add(graph.matmul(graph.use(params_[4]), h2), graph.use(params_[5]));
        return graph.reshape(out, {1, 1, config_.feature_dim});
    }
    NodeId s1 = graph.maxpool2x2(graph.relu(graph.conv2d(input, graph.use(params_[0]), graph.use(params_[1]), 1)));
    NodeId s2 = graph.maxpool2x2(graph.relu(graph.conv2d(s1, graph.use(params_[2]), graph.use(params_[3]), 1)));
    NodeId s3 = graph.maxpool2x2(graph.relu(graph.conv2d(s2, graph.use(params_[4]), graph.use(params_[5]), 1)));
    return s3;
}

Tensor Backbone::forward_eval(const Graph& graph, const Tensor& input) const {
    check_input(input);
    auto pv = [&](size_t i) -> const Tensor& { return graph.param(params_[i]).value; };
    if (config_.preset == BackbonePreset::Mlp2d) {
        Tensor h1 = k_relu(k_add(k_matmul(pv(0), input), pv(1)));
        Tensor h2 = k_relu(k_add(k_matmul(pv(2), h1), pv(3)));
        Tensor out = k_add(k_matmul(pv(4), h2), pv(5));
        return Tensor({1, 1, out.dim(0)}, out.values());
    }
    const Tensor& b1 = pv(1);
    const Tensor& b2 = pv(3);
    const Tensor& b3 = pv(5);
    Tensor s1 = k_maxpool2x2(k_relu(k_conv2d(input, pv(0), &b1, 1)), nullptr);
    Tensor s2 = k_maxpool2x2(k_relu(k_conv2d(s1, pv(2), &b2, 1)), nullptr);
    Tensor s3 = k_maxpool2x2(k_relu(k_conv2d(s2, pv(4), &b3, 1)), nullptr);
    return s3;
}

std::vector<int> Backbone::expected_input_shape(int h, int w) const {
    if (config_.preset == BackbonePreset::Mlp2d) return {2};
    return {h, w, 1};
}

} // namespace cssr
