#pragma once

#include "cssr/backbone.hpp"
#include "cssr/head.hpp"

namespace cssr {

// A backbone plus classification head sharing one parameter store.
struct Model {
    Graph graph;
    Backbone backbone;
    Head head;

    static Model build(const BackboneConfig& bc, const HeadConfig& hc, uint64_t seed,
                       Precision precision = Precision::f64);

    // Tape-free inference.
    Tensor features(const Tensor& input) const { return backbone.forward_eval(graph, input); }
    struct Evaluation {
        Tensor feature;
        Head::Output out;
    };
    Evaluation evaluate(const Tensor& input) const;
    int predict(const Tensor& input) const { return evaluate(input).out.predicted; }

    // Training-tape loss for one sample (input already a tape node).
    NodeId sample_loss(NodeId input, int label) {
        return head.loss(graph, backbone.forward(graph, input), label);
    }
};

} // namespace cssr
