#include "cssr/model.hpp"

namespace cssr {

Model Model::build(const BackboneConfig& bc, const HeadConfig& hc, uint64_t seed, Precision precision) {
    Model m;
    m.graph = Graph(precision);
    BackboneConfig bcs = bc;
    bcs.seed = seed;
    m.backbone.build(m.graph, bcs);
    m.head.build(m.graph, hc, bcs.feature_dim, seed);
    return m;
}

Model::Evaluation Model::evaluate(const Tensor& input) const {
    Evaluation ev;
    ev.feature = backbone.forward_eval(graph, input);
    ev.out = head.evaluate(graph, ev.feature);
    return ev;
}

} // namespace cssr
