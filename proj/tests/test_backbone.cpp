#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cssr/backbone.hpp"

using namespace cssr;

TEST_CASE("mlp2d emits 1x1xD feature maps") {
    Graph g;
    Backbone bb;
    bb.build(g, {BackbonePreset::Mlp2d, 8, 1});
    Tensor point({2}, {0.3, -1.2});
    Tensor fm = bb.forward_eval(g, point);
    CHECK(fm.shape() == std::vector<int>({1, 1, 8}));
}

TEST_CASE("smallconv maps 28x28x1 to 3x3x128") {
    Graph g;
    Backbone bb;
    bb.build(g, {BackbonePreset::SmallConv, 128, 1});
    Tensor img = Tensor::filled({28, 28, 1}, 0.5);
    Tensor fm = bb.forward_eval(g, img);
    CHECK(fm.shape() == std::vector<int>({3, 3, 128}));
}

TEST_CASE("same seed gives identical initial parameters") {
    Graph g1, g2;
    Backbone a, b;
    a.build(g1, {BackbonePreset::SmallConv, 128, 7});
    b.build(g2, {BackbonePreset::SmallConv, 128, 7});
    REQUIRE(g1.param_count() == g2.param_count());
    for (int i = 0; i < g1.param_count(); ++i) {
        const Tensor& x = g1.param(i).value;
        const Tensor& y = g2.param(i).value;
        REQUIRE(x.size() == y.size());
        for (int64_t j = 0; j < x.size(); ++j) CHECK(x[j] == y[j]);
    }
}

TEST_CASE("different seeds give different parameters") {
    Graph g1, g2;
    Backbone a, b;
    a.build(g1, {BackbonePreset::Mlp2d, 8, 1});
    b.build(g2, {BackbonePreset::Mlp2d, 8, 2});
    bool any_diff = false;
    for (int64_t j = 0; j < g1.param(0).value.size(); ++j)
        any_diff = any_diff || g1.param(0).value[j] != g2.param(0).value[j];
    CHECK(any_diff);
}

TEST_CASE("zero parameters give all-zero feature maps") {
    Graph g;
    Backbone bb;
    bb.build(g, {BackbonePreset::Mlp2d, 4, 3});
    for (int i = 0; i < g.param_count(); ++i) g.param(i).value.fill(0.0);
    Tensor fm = bb.forward_eval(g, Tensor({2}, {1.5, -2.0}));
    for (int64_t i = 0; i < fm.size(); ++i) CHECK(fm[i] == 0.0);
}

TEST_CASE("extraction is pure: same input gives identical features") {
    Graph g;
    Backbone bb;
    bb.build(g, {BackbonePreset::SmallConv, 128, 5});
    Rng rng(9);
    Tensor img({12, 12, 1});
    for (int64_t i = 0; i < img.size(); ++i) img[i] = rng.uniform();
    Tensor a = bb.forward_eval(g, img);
    Tensor b = bb.forward_eval(g, img);
    REQUIRE(a.size() == b.size());
    for (int64_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("input shape mismatch is rejected with shapes named") {
    Graph g;
    Backbone bb;
    bb.build(g, {BackbonePreset::Mlp2d, 8, 0});
    CHECK_THROWS_WITH_AS(bb.forward_eval(g, Tensor({3})), doctest::Contains("[3]"), ShapeError);
    Graph g2;
    Backbone conv;
    conv.build(g2, {BackbonePreset::SmallConv, 128, 0});
    CHECK_THROWS_AS(conv.forward_eval(g2, Tensor({28, 28, 3})), ShapeError);
}

TEST_CASE("invalid configs rejected") {
    Graph g;
    Backbone bb;
    CHECK_THROWS_AS(bb.build(g, {BackbonePreset::Mlp2d, 65, 0}), ConfigError);
    CHECK_THROWS_AS(bb.build(g, {BackbonePreset::SmallConv, 64, 0}), ConfigError);
    CHECK_THROWS_AS(backbone_preset_from_string("resnet"), ConfigError);
}

TEST_CASE("tape path matches eval path") {
    Graph g;
    Backbone bb;
    bb.build(g, {BackbonePreset::SmallConv, 128, 11});
    Rng rng(4);
    Tensor img({16, 16, 1});
    for (int64_t i = 0; i < img.size(); ++i) img[i] = rng.uniform();
    Tensor ev = bb.forward_eval(g, img);
    g.clear_tape();
    NodeId out = bb.forward(g, g.constant(img));
    const Tensor& tv = g.value(out);
    REQUIRE(tv.shape() == ev.shape());
    for (int64_t i = 0; i < tv.size(); ++i) CHECK(tv[i] == ev[i]);
}
