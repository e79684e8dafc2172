#include <doctest.h>

#include <cmath>

#include "harmon/config.hpp"
#include "harmon/features.hpp"
#include "harmon/phantom.hpp"

using namespace harmon;

TEST_CASE("feature vector has the documented length and order") {
    const Slice s = render_scan(generate_phantom(1, 64), profile_by_id("site_a"), 1);
    const auto f = feature_vector(s);
    REQUIRE(f.size() == static_cast<size_t>(kFeatureDim));
    REQUIRE(feature_names().size() == static_cast<size_t>(kFeatureDim));
    CHECK(feature_names()[0] == "mean");
    CHECK(feature_names()[12] == "glcm_energy_h");
    for (double v : f) CHECK(std::isfinite(v));
    // percentiles are ordered
    CHECK(f[5] <= f[6]);
    CHECK(f[6] <= f[7]);
}

TEST_CASE("features are deterministic and profile-sensitive") {
    const Phantom p = generate_phantom(2, 64);
    const Slice a1 = render_scan(p, profile_by_id("site_a"), 5);
    const Slice a2 = render_scan(p, profile_by_id("site_a"), 5);
    CHECK(feature_vector(a1) == feature_vector(a2));
    const Slice d = render_scan(p, profile_by_id("site_d"), 5);
    CHECK(feature_vector(a1) != feature_vector(d));
}

TEST_CASE("softmax classifier separates synthetic profiles") {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    const std::vector<std::string> ids = {"site_a", "site_b", "site_c"};
    for (int sub = 0; sub < 12; ++sub) {
        const Phantom p = generate_phantom(100 + sub, 64);
        for (int k = 0; k < 3; ++k) {
            x.push_back(feature_vector(render_scan(p, profile_by_id(ids[k]), sub)));
            y.push_back(k);
        }
    }
    SoftmaxClassifier clf;
    clf.fit(x, y, 3);
    const auto pred = clf.predict(x);
    CHECK(accuracy(y, pred) >= 0.9);
    CHECK(macro_f1(y, pred, 3) >= 0.9);
}

TEST_CASE("classifier rejects degenerate training sets") {
    SoftmaxClassifier clf;
    std::vector<std::vector<double>> x = {{1.0, 2.0}, {3.0, 4.0}};
    CHECK_THROWS_AS(clf.fit(x, {0, 0}, 2), InvalidArgument);
    CHECK_THROWS_AS(clf.fit({}, {}, 2), InvalidArgument);
}

TEST_CASE("ridge regression recovers a linear relationship") {
    Rng rng(31);
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (int i = 0; i < 60; ++i) {
        std::vector<double> row(4);
        for (auto& v : row) v = rng.normal();
        x.push_back(row);
        y.push_back(3.0 * row[0] - 2.0 * row[2] + 5.0 + 0.01 * rng.normal());
    }
    RidgeRegressor reg;
    reg.fit(x, y, 1e-3);
    std::vector<double> pred;
    for (const auto& row : x) pred.push_back(reg.predict(row));
    CHECK(r_squared(y, pred) > 0.99);
}

TEST_CASE("age proxy is recoverable from anatomy alone") {
    // regress age on label-map class fractions: R^2 > 0.99 proves the
    // downstream task is anatomy-determined
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (int sub = 0; sub < 40; ++sub) {
        const Phantom p = generate_phantom(500 + sub, 64);
        std::vector<double> count(kNumTissueClasses + 1, 0.0);
        for (int lab : p.anatomy_map) count[lab] += 1.0;
        const double brain = count[1] + count[2] + count[3] + count[4];
        // ventricle area grows quadratically in the radius fraction, so the
        // square root of the area share is the age-linear anatomy feature
        x.push_back({std::sqrt(count[kVentricle] / brain), count[kCortex] / brain,
                     count[kDeepGray] / brain});
        y.push_back(p.age_proxy);
    }
    RidgeRegressor reg;
    reg.fit(x, y, 1e-6);
    std::vector<double> pred;
    for (const auto& row : x) pred.push_back(reg.predict(row));
    CHECK(r_squared(y, pred) > 0.99);
}

TEST_CASE("macro f1 and accuracy on known confusion") {
    const std::vector<int> truth = {0, 0, 1, 1};
    const std::vector<int> pred = {0, 1, 1, 1};
    // class 0: tp=1 fp=0 fn=1 -> f1 = 2/3; class 1: tp=2 fp=1 fn=0 -> f1 = 0.8
    CHECK(macro_f1(truth, pred, 2) == doctest::Approx((2.0 / 3.0 + 0.8) / 2.0));
    CHECK(accuracy(truth, pred) == doctest::Approx(0.75));
}
