#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cssr/metrics.hpp"

using namespace cssr;

namespace {

// O(n^2) pairwise oracle.
double auroc_brute(const std::vector<double>& known, const std::vector<double>& unknown) {
    double acc = 0.0;
    for (double k : known) {
        for (double u : unknown) {
            if (k > u) acc += 1.0;
            else if (k == u) acc += 0.5;
        }
    }
    return acc / (static_cast<double>(known.size()) * static_cast<double>(unknown.size()));
}

// Exhaustive threshold sweep: every achievable accept set is "score >= t"
// with t at an observed score or +inf.
double dtacc_brute(const std::vector<double>& known, const std::vector<double>& unknown) {
    std::vector<double> ts;
    for (double s : known) ts.push_back(s);
    for (double s : unknown) ts.push_back(s);
    ts.push_back(std::numeric_limits<double>::infinity());
    double best = 0.0;
    for (double t : ts) {
        double tpr = 0, tnr = 0;
        for (double s : known) tpr += s >= t ? 1.0 : 0.0;
        for (double s : unknown) tnr += s < t ? 1.0 : 0.0;
        best = std::max(best, 0.5 * (tpr / known.size() + tnr / unknown.size()));
    }
    return best;
}

double aupr_brute(const std::vector<double>& pos_in, const std::vector<double>& neg_in, bool out_mode) {
    std::vector<double> pos, neg;
    if (!out_mode) {
        pos = pos_in;
        neg = neg_in;
    } else {
        for (double s : neg_in) pos.push_back(-s);
        for (double s : pos_in) neg.push_back(-s);
    }
    std::vector<double> ts;
    for (double s : pos) ts.push_back(s);
    for (double s : neg) ts.push_back(s);
    std::sort(ts.begin(), ts.end(), std::greater<>());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    double area = 0.0, prev_r = 0.0;
    for (double t : ts) {
        double tp = 0, fp = 0;
        for (double s : pos) tp += s >= t ? 1.0 : 0.0;
        for (double s : neg) fp += s >= t ? 1.0 : 0.0;
        double r = tp / static_cast<double>(pos.size());
        double p = tp + fp > 0 ? tp / (tp + fp) : 1.0;
        area += (r - prev_r) * p;
        prev_r = r;
    }
    return area;
}

std::vector<double> random_scores(Rng& rng, int max_n, bool quantized) {
    int n = 1 + rng.uniform_int(max_n);
    std::vector<double> v(static_cast<size_t>(n));
    for (double& x : v) x = quantized ? static_cast<double>(rng.uniform_int(10)) : rng.uniform(-3, 3);
    return v;
}

} // namespace

TEST_CASE("auroc on separable and tied inputs") {
    std::vector<double> k{2, 3}, u{0, 1};
    CHECK(auroc(k, u) == 1.0);
    std::vector<double> one{1};
    CHECK(auroc(one, one) == 0.5);
    CHECK_THROWS_AS(auroc(std::vector<double>{}, u), ConfigError);
}

TEST_CASE("auroc matches the pairwise oracle on random instances") {
    Rng rng(101);
    for (int t = 0; t < 100; ++t) {
        bool q = t % 2 == 0; // quantized scores force ties
        auto k = random_scores(rng, 50, q);
        auto u = random_scores(rng, 50, q);
        CHECK(auroc(k, u) == doctest::Approx(auroc_brute(k, u)).epsilon(1e-12));
    }
}

TEST_CASE("auroc complement identity") {
    Rng rng(103);
    for (int t = 0; t < 50; ++t) {
        auto a = random_scores(rng, 30, t % 2 == 0);
        auto b = random_scores(rng, 30, t % 2 == 0);
        CHECK(std::fabs(auroc(a, b) + auroc(b, a) - 1.0) < 1e-12);
    }
}

TEST_CASE("dtacc on hand cases") {
    std::vector<double> k{2, 3}, u{0, 1};
    CHECK(dtacc(k, u) == 1.0);
    std::vector<double> same{1, 2, 3};
    CHECK(dtacc(same, same) == 0.5);
    std::vector<double> k2{0.9, 0.2}, u2{0.1, 0.8};
    CHECK(dtacc(k2, u2) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("dtacc matches the exhaustive sweep and never drops below 0.5") {
    Rng rng(107);
    for (int t = 0; t < 100; ++t) {
        auto k = random_scores(rng, 50, t % 2 == 0);
        auto u = random_scores(rng, 50, t % 2 == 0);
        double d = dtacc(k, u);
        CHECK(d == doctest::Approx(dtacc_brute(k, u)).epsilon(1e-12));
        CHECK(d >= 0.5);
    }
}

TEST_CASE("aupr on hand cases") {
    std::vector<double> k{2, 3}, u{0, 1};
    CHECK(aupr(k, u, PositiveSide::In) == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> k4{0.9, 0.6}, u4{0.7, 0.1};
    CHECK(aupr(k4, u4, PositiveSide::In) ==
          doctest::Approx(aupr_brute(k4, u4, false)).epsilon(1e-12));
}

TEST_CASE("aupr matches the brute-force sweep on random instances") {
    Rng rng(109);
    for (int t = 0; t < 100; ++t) {
        auto k = random_scores(rng, 50, t % 2 == 0);
        auto u = random_scores(rng, 50, t % 2 == 0);
        CHECK(aupr(k, u, PositiveSide::In) == doctest::Approx(aupr_brute(k, u, false)).epsilon(1e-12));
        CHECK(aupr(k, u, PositiveSide::Out) == doctest::Approx(aupr_brute(k, u, true)).epsilon(1e-12));
    }
}

TEST_CASE("aupr out-mode duality") {
    Rng rng(113);
    for (int t = 0; t < 20; ++t) {
        auto k = random_scores(rng, 30, false);
        auto u = random_scores(rng, 30, false);
        std::vector<double> nk, nu;
        for (double s : k) nk.push_back(-s);
        for (double s : u) nu.push_back(-s);
        CHECK(aupr(k, u, PositiveSide::Out) == doctest::Approx(aupr(nu, nk, PositiveSide::In)).epsilon(1e-12));
    }
}

TEST_CASE("fit_threshold order statistic") {
    std::vector<double> scores;
    for (int i = 1; i <= 100; ++i) scores.push_back(static_cast<double>(i));
    CHECK(fit_threshold(scores, 0.95) == 6.0);
    CHECK(fit_threshold(scores, 1.0) == 1.0);
    std::vector<double> single{42.0};
    CHECK(fit_threshold(single, 0.95) == 42.0);
    CHECK(fit_threshold(single, 0.5) == 42.0);
    CHECK_THROWS_AS(fit_threshold(std::vector<double>{}, 0.95), ConfigError);
}

TEST_CASE("threshold acceptance semantics") {
    Rng rng(127);
    for (int t = 0; t < 50; ++t) {
        auto s = random_scores(rng, 80, false);
        double delta = fit_threshold(s, 0.95);
        int64_t accepted = 0;
        for (double v : s)
            if (v >= delta) ++accepted;
        double frac = static_cast<double>(accepted) / static_cast<double>(s.size());
        CHECK(frac >= 0.95);
        // removing delta's order statistic drops acceptance below target
        int64_t above = 0;
        for (double v : s)
            if (v > delta) ++above;
        CHECK(static_cast<double>(above) / static_cast<double>(s.size()) < 0.95);
    }
}

TEST_CASE("tnr at tpr") {
    std::vector<double> k{2, 3}, u{0, 1};
    CHECK(tnr_at_tpr(k, u, 0.95) == 1.0);
    std::vector<double> scores;
    for (int i = 1; i <= 100; ++i) scores.push_back(static_cast<double>(i));
    CHECK(tnr_at_tpr(scores, scores, 0.95) == doctest::Approx(0.05).epsilon(1e-12));
    std::vector<double> uu{5, 6, 7};
    CHECK(tnr_at_tpr(scores, uu, 1.0) == 0.0);
}

TEST_CASE("macro f1 over known plus unknown classes") {
    std::vector<ScoredSample> all_correct = {
        {1.0, true, 0, 0}, {1.0, true, 1, 1}, {0.1, false, -1, 0},
    };
    CHECK(macro_f1_open(all_correct, 0.5, 2) == 1.0);

    // all knowns rejected, test set all known -> every class F1 = 0
    std::vector<ScoredSample> rejected = {{0.1, true, 0, 0}, {0.2, true, 1, 1}};
    CHECK(macro_f1_open(rejected, 0.5, 2) == 0.0);

    std::vector<ScoredSample> six = {
        {1.0, true, 0, 0}, {1.0, true, 0, 1}, {0.2, true, 1, 1},
        {0.9, true, 1, 1}, {0.3, false, -1, 0}, {0.8, false, -1, 1},
    };
    // class 0: tp1 fp0 fn1 -> 2/3; class 1: tp1 fp2 fn0 -> 1/2; unknown: tp1 fp1 fn1 -> 1/2
    double expect = (2.0 / 3.0 + 0.5 + 0.5) / 3.0;
    CHECK(macro_f1_open(six, 0.5, 2) == doctest::Approx(expect).epsilon(1e-12));
    CHECK_THROWS_AS(macro_f1_open(six, 0.5, 0), ConfigError);
}

TEST_CASE("oscr hand cases") {
    std::vector<ScoredSample> perfect = {
        {1.0, true, 0, 0}, {1.0, true, 1, 1}, {0.0, false, -1, 0}, {0.0, false, -1, 1},
    };
    CHECK(oscr(perfect) == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<ScoredSample> all_wrong = {
        {1.0, true, 0, 1}, {0.9, true, 1, 0}, {0.5, false, -1, 0},
    };
    CHECK(oscr(all_wrong) == 0.0);

    std::vector<ScoredSample> four = {
        {0.9, true, 0, 0}, {0.4, true, 1, 0}, {0.6, false, -1, 0}, {0.2, false, -1, 1},
    };
    CHECK(oscr(four) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(oscr(std::vector<ScoredSample>{{1.0, true, 0, 0}}), ConfigError);
}

TEST_CASE("openness endpoints") {
    CHECK(openness(15, 30, 15) == doctest::Approx(1.0 - std::sqrt(2.0 / 3.0)).epsilon(1e-12));
    CHECK(std::fabs(openness(15, 30, 15) - 0.18) < 0.005);
    CHECK(openness(15, 100, 15) == doctest::Approx(1.0 - std::sqrt(30.0 / 115.0)).epsilon(1e-12));
    CHECK(std::fabs(openness(15, 100, 15) - 0.49) < 0.005);
    CHECK(openness(7, 7, 7) == 0.0);
    CHECK_THROWS_AS(openness(0, 5, 5), ConfigError);
    CHECK_THROWS_AS(openness(10, 5, 10), ConfigError);
}

TEST_CASE("metrics are invariant under strictly increasing transforms") {
    Rng rng(131);
    auto apply = [](const std::vector<double>& v, int which) {
        std::vector<double> out;
        for (double s : v) out.push_back(which == 0 ? std::exp(s) : 3.0 * s + 7.0);
        return out;
    };
    for (int t = 0; t < 40; ++t) {
        auto k = random_scores(rng, 40, t % 2 == 0);
        auto u = random_scores(rng, 40, t % 2 == 0);
        for (int which : {0, 1}) {
            auto kt = apply(k, which);
            auto ut = apply(u, which);
            CHECK(auroc(k, u) == doctest::Approx(auroc(kt, ut)).epsilon(1e-9));
            CHECK(dtacc(k, u) == doctest::Approx(dtacc(kt, ut)).epsilon(1e-9));
            CHECK(aupr(k, u, PositiveSide::In) == doctest::Approx(aupr(kt, ut, PositiveSide::In)).epsilon(1e-9));
            CHECK(tnr_at_tpr(k, u) == doctest::Approx(tnr_at_tpr(kt, ut)).epsilon(1e-12));
        }
    }
}
