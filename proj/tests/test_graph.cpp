#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cssr/graph.hpp"
#include "cssr/kernels.hpp"

using namespace cssr;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// Independent central-difference oracle over a scalar-valued tape.
double numeric_grad(Graph& g, NodeId loss, int param, int64_t index, double h = 1e-5) {
    double saved = g.param(param).value[index];
    g.param(param).value[index] = saved + h;
    g.recompute();
    double up = g.value(loss)[0];
    g.param(param).value[index] = saved - h;
    g.recompute();
    double down = g.value(loss)[0];
    g.param(param).value[index] = saved;
    g.recompute();
    return (up - down) / (2.0 * h);
}

double max_fd_rel_error(Graph& g, NodeId loss, double h = 1e-5) {
    g.backward(loss);
    double worst = 0.0;
    for (int pi = 0; pi < g.param_count(); ++pi) {
        Tensor analytic = g.param(pi).grad;
        for (int64_t i = 0; i < analytic.size(); ++i) {
            double n = numeric_grad(g, loss, pi, i, h);
            double a = analytic[i];
            double denom = std::max({std::fabs(a), std::fabs(n), 1.0});
            worst = std::max(worst, std::fabs(a - n) / denom);
        }
    }
    return worst;
}

} // namespace

TEST_CASE("tanh is zero at zero") {
    Graph g;
    NodeId x = g.constant(Tensor({3}, {0, 0, 0}));
    NodeId y = g.tanh(x);
    for (int i = 0; i < 3; ++i) CHECK(g.value(y)[i] == 0.0);
}

TEST_CASE("softmax of constant channels is uniform") {
    for (double c : {-7.5, 0.0, 3.25}) {
        Graph g;
        NodeId x = g.constant(Tensor({4}, {c, c, c, c}));
        NodeId y = g.softmax_channels(x);
        for (int i = 0; i < 4; ++i) CHECK(g.value(y)[i] == doctest::Approx(0.25).epsilon(1e-12));
    }
}

TEST_CASE("conv2d all-ones 3x3 on all-ones 3x3 image") {
    Graph g;
    NodeId x = g.constant(Tensor::filled({3, 3, 1}, 1.0));
    NodeId w = g.constant(Tensor::filled({3, 3, 1, 1}, 1.0));
    NodeId y = g.conv2d(x, w);
    const Tensor& out = g.value(y);
    REQUIRE(out.shape() == std::vector<int>({3, 3, 1}));
    CHECK(out.at(1, 1, 0) == 9.0);
    CHECK(out.at(0, 0, 0) == 4.0);
    CHECK(out.at(0, 2, 0) == 4.0);
    CHECK(out.at(2, 0, 0) == 4.0);
    CHECK(out.at(2, 2, 0) == 4.0);
    CHECK(out.at(0, 1, 0) == 6.0);
}

TEST_CASE("conv2d stride-2 output shape") {
    Graph g;
    NodeId x = g.constant(Tensor::filled({28, 28, 2}, 0.5));
    NodeId w = g.constant(Tensor::filled({3, 3, 2, 4}, 0.1));
    NodeId y = g.conv2d(x, w, 2);
    CHECK(g.value(y).shape() == std::vector<int>({14, 14, 4}));
}

TEST_CASE("shape mismatch names offending shapes") {
    Graph g;
    NodeId a = g.constant(Tensor({2, 3}));
    NodeId b = g.constant(Tensor({4}));
    CHECK_THROWS_WITH_AS(g.matmul(a, b), doctest::Contains("[2x3]"), ShapeError);
    NodeId c = g.constant(Tensor({5}));
    CHECK_THROWS_AS(g.add(b, c), ShapeError);
}

TEST_CASE("non-finite input rejected") {
    Graph g;
    CHECK_THROWS_AS(g.constant(Tensor({2}, {1.0, std::numeric_limits<double>::quiet_NaN()})), NumericError);
    NodeId big = g.constant(Tensor({1}, {1e308}));
    NodeId big2 = g.constant(Tensor({1}, {10.0}));
    CHECK_THROWS_AS(g.multiply(g.multiply(big, big), big2), NumericError); // overflow to inf
}

TEST_CASE("backward of linear map gives the scale factor") {
    Graph g;
    int p = g.add_parameter("p", Tensor({2, 3}));
    NodeId loss = g.sum(g.scale(g.use(p), 3.0));
    g.backward(loss);
    for (int64_t i = 0; i < 6; ++i) CHECK(g.param(p).grad[i] == 3.0);
}

TEST_CASE("backward of tanh at zero gives one") {
    Graph g;
    int p = g.add_parameter("p", Tensor({4}));
    NodeId loss = g.sum(g.tanh(g.use(p)));
    g.backward(loss);
    for (int64_t i = 0; i < 4; ++i) CHECK(g.param(p).grad[i] == 1.0);
}

TEST_CASE("backward rejects non-scalar loss") {
    Graph g;
    int p = g.add_parameter("p", Tensor({4}));
    NodeId y = g.tanh(g.use(p));
    CHECK_THROWS_AS(g.backward(y), ConfigError);
}

TEST_CASE("unreached parameters get zero gradient") {
    Graph g;
    Rng rng(3);
    int p = g.add_parameter("used", random_tensor({3}, rng));
    int q = g.add_parameter("unused", random_tensor({3}, rng));
    NodeId loss = g.sum(g.tanh(g.use(p)));
    g.backward(loss);
    for (int64_t i = 0; i < 3; ++i) CHECK(g.param(q).grad[i] == 0.0);
}

TEST_CASE("random two-layer network matches finite differences") {
    Rng rng(42);
    Graph g;
    int w1 = g.add_parameter("w1", random_tensor({5, 3}, rng));
    int b1 = g.add_parameter("b1", random_tensor({5}, rng));
    int w2 = g.add_parameter("w2", random_tensor({2, 5}, rng));
    NodeId x = g.constant(random_tensor({3}, rng));
    NodeId h = g.tanh(g.add(g.matmul(g.use(w1), x), g.use(b1)));
    NodeId y = g.matmul(g.use(w2), h);
    NodeId loss = g.sum(g.multiply(y, y));
    CHECK(max_fd_rel_error(g, loss) < 1e-6);
}

TEST_CASE("gradient fidelity across primitives on random instances") {
    Rng rng(7);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        Graph g;
        int h = 2 + rng.uniform_int(5);
        int w = 2 + rng.uniform_int(5);
        int c = 1 + rng.uniform_int(3);
        int po = trial % 10;
        NodeId loss = -1;
        switch (po) {
            case 0: { // matmul (matrix-vector and matrix-matrix)
                int n = 1 + rng.uniform_int(4), k = 1 + rng.uniform_int(4), p2 = 1 + rng.uniform_int(3);
                int a = g.add_parameter("a", random_tensor({n, k}, rng));
                int b = g.add_parameter("b", random_tensor({k, p2}, rng));
                loss = g.sum(g.tanh(g.matmul(g.use(a), g.use(b))));
                break;
            }
            case 1: { // conv2d 3x3, stride 1 or 2, with bias
                int ci = 1 + rng.uniform_int(2), co = 1 + rng.uniform_int(3);
                int stride = 1 + (trial % 2);
                int x = g.add_parameter("x", random_tensor({h, w, ci}, rng));
                int k = g.add_parameter("k", random_tensor({3, 3, ci, co}, rng));
                int b = g.add_parameter("bias", random_tensor({co}, rng));
                loss = g.sum(g.tanh(g.conv2d(g.use(x), g.use(k), g.use(b), stride)));
                break;
            }
            case 2: { // conv2d 1x1
                int ci = 1 + rng.uniform_int(3), co = 1 + rng.uniform_int(3);
                int x = g.add_parameter("x", random_tensor({h, w, ci}, rng));
                int k = g.add_parameter("k", random_tensor({1, 1, ci, co}, rng));
                loss = g.mean(g.conv2d(g.use(x), g.use(k)));
                break;
            }
            case 3: { // add/subtract/multiply/scale chain
                int a = g.add_parameter("a", random_tensor({h, w, c}, rng));
                int b = g.add_parameter("b", random_tensor({h, w, c}, rng));
                NodeId t = g.subtract(g.add(g.use(a), g.use(b)), g.scale(g.multiply(g.use(a), g.use(b)), 0.7));
                loss = g.sum(t);
                break;
            }
            case 4: { // tanh/relu/abs
                int a = g.add_parameter("a", random_tensor({h, w, c}, rng));
                loss = g.sum(g.abs(g.relu(g.tanh(g.use(a)))));
                break;
            }
            case 5: { // reductions over channel axis
                int a = g.add_parameter("a", random_tensor({h, w, c}, rng));
                NodeId s = g.sum(g.use(a), Axis::Last);
                NodeId m = g.mean(g.multiply(g.use(a), g.use(a)), Axis::Last);
                loss = g.mean(g.add(s, m));
                break;
            }
            case 6: { // max-pool + global average pool
                int a = g.add_parameter("a", random_tensor({2 * h, 2 * w, c}, rng));
                loss = g.sum(g.global_avg_pool(g.maxpool2x2(g.use(a))));
                break;
            }
            case 7: { // softmax over channels, both ranks
                int a = g.add_parameter("a", random_tensor({h, w, 4}, rng, -3, 3));
                int v = g.add_parameter("v", random_tensor({5}, rng, -3, 3));
                NodeId sm = g.softmax_channels(g.use(a));
                NodeId sv = g.softmax_channels(g.use(v));
                int pick = g.add_parameter("pick", random_tensor({h, w, 4}, rng));
                loss = g.add(g.sum(g.multiply(sm, g.use(pick))), g.mean(g.multiply(sv, sv)));
                break;
            }
            case 8: { // log on strictly positive inputs
                int a = g.add_parameter("a", random_tensor({h * w}, rng, 0.2, 2.0));
                loss = g.sum(g.log(g.use(a)));
                break;
            }
            default: { // concat of channel maps
                int a = g.add_parameter("a", random_tensor({h, w, 1}, rng));
                int b = g.add_parameter("b", random_tensor({h, w, 2}, rng));
                int cc = g.add_parameter("c", random_tensor({h, w, 1}, rng));
                NodeId cat = g.concat({g.use(a), g.use(b), g.use(cc)});
                loss = g.sum(g.multiply(cat, cat));
                break;
            }
        }
        worst = std::max(worst, max_fd_rel_error(g, loss));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("abs has subgradient zero at zero") {
    Graph g;
    int p = g.add_parameter("p", Tensor({3}));
    NodeId loss = g.sum(g.abs(g.use(p)));
    g.backward(loss);
    for (int64_t i = 0; i < 3; ++i) CHECK(g.param(p).grad[i] == 0.0);
}

TEST_CASE("softmax output sums to one per location and stays in (0,1)") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        Graph g;
        NodeId x = g.constant(random_tensor({3, 4, 5}, rng, -15, 15));
        const Tensor& y = g.value(g.softmax_channels(x));
        for (int yy = 0; yy < 3; ++yy) {
            for (int xx = 0; xx < 4; ++xx) {
                double s = 0.0;
                for (int ch = 0; ch < 5; ++ch) {
                    double v = y.at(yy, xx, ch);
                    CHECK(v > 0.0);
                    CHECK(v < 1.0);
                    s += v;
                }
                CHECK(std::fabs(s - 1.0) < 1e-9);
            }
        }
    }
}

TEST_CASE("softmax stays finite and normalized under extreme logits") {
    // max-subtraction: huge spreads saturate to {0,1} but never overflow
    Graph g;
    NodeId x = g.constant(Tensor({4}, {-300.0, 0.0, 250.0, 300.0}));
    const Tensor& y = g.value(g.softmax_channels(x));
    double s = 0.0;
    for (int i = 0; i < 4; ++i) {
        CHECK(y[i] >= 0.0);
        CHECK(y[i] <= 1.0);
        s += y[i];
    }
    CHECK(std::fabs(s - 1.0) < 1e-9);
}

TEST_CASE("forward and backward are bit-deterministic") {
    auto run = [](uint64_t seed) {
        Rng rng(seed);
        Graph g;
        int w = g.add_parameter("w", random_tensor({4, 6}, rng));
        NodeId x = g.constant(random_tensor({6}, rng));
        NodeId loss = g.sum(g.tanh(g.matmul(g.use(w), x)));
        g.backward(loss);
        std::vector<double> out;
        out.push_back(g.value(loss)[0]);
        for (int64_t i = 0; i < g.param(0).grad.size(); ++i) out.push_back(g.param(0).grad[i]);
        return out;
    };
    auto a = run(99), b = run(99);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("grad_check passes on identity loss") {
    Graph g;
    int p = g.add_parameter("p", Tensor({1}, {0.37}));
    NodeId loss = g.sum(g.use(p));
    auto report = g.grad_check(loss, 1e-6);
    CHECK(report.pass);
    REQUIRE(report.entries.size() == 1);
    CHECK(report.entries[0].max_rel_error < 1e-9);
}

TEST_CASE("grad_check flags subgradient mismatch with parameter name") {
    // relu at exactly zero: analytic subgradient 0, central difference 0.5
    Graph g;
    int p = g.add_parameter("kink", Tensor({2}));
    NodeId loss = g.sum(g.relu(g.use(p)));
    auto report = g.grad_check(loss, 1e-4);
    CHECK_FALSE(report.pass);
    REQUIRE(report.entries.size() == 1);
    CHECK(report.entries[0].param == "kink");
    CHECK_FALSE(report.entries[0].pass);
}

TEST_CASE("sgd_step without momentum subtracts lr*grad") {
    Graph g;
    int p = g.add_parameter("p", Tensor({2}, {1.0, -2.0}));
    NodeId loss = g.sum(g.scale(g.use(p), 3.0));
    g.backward(loss);
    g.sgd_step(1.0, 0.0);
    CHECK(g.param(p).value[0] == 1.0 - 3.0);
    CHECK(g.param(p).value[1] == -2.0 - 3.0);
}

TEST_CASE("sgd_step momentum recursion over two steps") {
    Graph g;
    int p = g.add_parameter("p", Tensor({1}, {0.0}));
    // constant gradient g=2 from loss = 2*p
    for (int step = 0; step < 2; ++step) {
        g.clear_tape();
        NodeId loss = g.sum(g.scale(g.use(p), 2.0));
        g.backward(loss);
        g.sgd_step(1.0, 0.9);
    }
    // v1 = 2, p -= 2; v2 = 0.9*2 + 2 = 3.8, p -= 3.8 => total 5.8 = g + 1.9g
    CHECK(g.param(p).value[0] == doctest::Approx(-5.8).epsilon(1e-12));
}

TEST_CASE("sgd_step with zero gradient leaves parameters unchanged") {
    Graph g;
    int p = g.add_parameter("p", Tensor({2}, {0.5, -0.5}));
    int q = g.add_parameter("q", Tensor({1}, {1.0}));
    NodeId loss = g.sum(g.tanh(g.use(q)));
    g.backward(loss); // p unreached -> zero grad
    g.sgd_step(0.1, 0.0);
    CHECK(g.param(p).value[0] == 0.5);
    CHECK(g.param(p).value[1] == -0.5);
}

TEST_CASE("sgd_step before backward is rejected") {
    Graph g;
    g.add_parameter("p", Tensor({1}, {1.0}));
    CHECK_THROWS_AS(g.sgd_step(0.1, 0.9), ConfigError);
}

TEST_CASE("f32 precision mode quantizes values and passes relaxed checks") {
    Rng rng(5);
    Graph g(Precision::f32);
    int w = g.add_parameter("w", random_tensor({3, 4}, rng));
    for (int64_t i = 0; i < g.param(w).value.size(); ++i) {
        double v = g.param(w).value[i];
        CHECK(v == static_cast<double>(static_cast<float>(v)));
    }
    NodeId x = g.constant(random_tensor({4}, rng));
    NodeId loss = g.sum(g.tanh(g.matmul(g.use(w), x)));
    auto report = g.grad_check(loss, 1e-2, 1e-3);
    CHECK(report.pass);
}
