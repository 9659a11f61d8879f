#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "llc/errors.hpp"
#include "llc/gmdh.hpp"

using namespace llc;
using doctest::Approx;

namespace {

// Reference least squares through Householder QR on the raw design matrix.
std::array<double, 6> qr_oracle(const std::vector<double>& x1, const std::vector<double>& x2,
                                const std::vector<double>& y) {
    Eigen::MatrixXd D(y.size(), 6);
    Eigen::VectorXd t(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double a = x1[i], b = x2[i];
        D.row(i) << 1.0, a, a * a, a * b, b * b, b;
        t(i) = y[i];
    }
    const Eigen::VectorXd c = D.colPivHouseholderQr().solve(t);
    return {c(0), c(1), c(2), c(3), c(4), c(5)};
}

FeatureTable random_table(std::size_t rows, std::size_t features, std::uint64_t seed,
                          double (*target)(const std::vector<double>&)) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    FeatureTable t;
    for (std::size_t j = 0; j < features; ++j) t.names.push_back("x" + std::to_string(j + 1));
    t.columns.assign(features, {});
    std::vector<double> x(features);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < features; ++j) {
            x[j] = u(rng);
            t.columns[j].push_back(x[j]);
        }
        t.target.push_back(target(x));
    }
    return t;
}

double exact_quadratic(const std::vector<double>& x) { return 1.0 + 2.0 * x[0] + 3.0 * x[0] * x[1] - x[1] * x[1]; }

double smooth_target(const std::vector<double>& x) {
    return std::exp(0.5 * x[0]) * (1.0 + 0.3 * x[1]) + 0.2 * x[2] * x[2] - 0.1 * x[3] + 0.05 * std::sin(2 * x[1]);
}

}  // namespace

TEST_CASE("fit_neuron recovers an exact quadratic") {
    const FeatureTable t = random_table(200, 2, 11, exact_quadratic);
    const auto beta = fit_neuron(t.columns[0], t.columns[1], t.target, 0.0);
    const std::array<double, 6> expected{1, 2, 0, 3, -1, 0};
    for (int k = 0; k < 6; ++k) CHECK(beta[k] == Approx(expected[k]).epsilon(1e-10).scale(1.0));
}

TEST_CASE("fit_neuron agrees with a QR oracle on noisy data") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::uniform_real_distribution<double> u(0.2, 3.0);
    std::vector<double> x1, x2, y;
    for (int i = 0; i < 300; ++i) {
        x1.push_back(u(rng));
        x2.push_back(u(rng));
        y.push_back(std::sin(x1.back()) * x2.back() + noise(rng));
    }
    const auto beta = fit_neuron(x1, x2, y, 0.0);
    const auto ref = qr_oracle(x1, x2, y);
    for (int k = 0; k < 6; ++k) CHECK(beta[k] == Approx(ref[k]).epsilon(1e-8).scale(1.0));
}

TEST_CASE("fit_neuron rejects short or degenerate inputs") {
    std::vector<double> five{1, 2, 3, 4, 5};
    CHECK_THROWS_AS(fit_neuron(five, five, five, 0.0), FitError);

    std::vector<double> a{1, 2, 3, 4, 5, 6, 7}, zero(7, 0.0), y{1, 2, 3, 4, 5, 6, 7};
    try {
        fit_neuron(a, zero, y, 0.0);
        FAIL("expected FitError");
    } catch (const FitError& e) {
        CHECK(std::string(e.what()).find("ridge") != std::string::npos);
    }
    // With ridge the same system becomes solvable.
    const auto beta = fit_neuron(a, zero, y, 1e-6);
    for (double b : beta) CHECK(std::isfinite(b));

    std::vector<double> bad{1, 2};
    CHECK_THROWS_AS(fit_neuron(a, bad, y, 0.0), FitError);
}

TEST_CASE("train_gmdh on the exact quadratic") {
    const FeatureTable train = random_table(200, 2, 21, exact_quadratic);
    const FeatureTable val = random_table(100, 2, 22, exact_quadratic);
    GmdhConfig cfg;
    cfg.ridge = 0.0;
    const GmdhModel m = train_gmdh(train, val, cfg);
    REQUIRE(m.layers.size() == 1);
    const GmdhNeuron& n = m.layers[0][m.output_neuron];
    CHECK(n.input_a == 0);
    CHECK(n.input_b == 1);
    CHECK(std::sqrt(n.external_criterion) < 1e-8);
}

TEST_CASE("external criterion is non-increasing across layers") {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
        const FeatureTable train = random_table(400, 4, seed, smooth_target);
        const FeatureTable val = random_table(150, 4, seed + 100, smooth_target);
        GmdhConfig cfg;
        cfg.max_layers = 6;
        cfg.neurons_kept = 6;
        const GmdhModel m = train_gmdh(train, val, cfg);
        for (std::size_t l = 1; l < m.layers.size(); ++l)
            CHECK(m.layers[l][0].external_criterion <= m.layers[l - 1][0].external_criterion);
        for (const auto& layer : m.layers) {
            CHECK(layer.size() <= 6u);
            for (std::size_t k = 1; k < layer.size(); ++k)
                CHECK(layer[k - 1].external_criterion <= layer[k].external_criterion);
        }
    }
}

TEST_CASE("training is deterministic") {
    const FeatureTable train = random_table(300, 4, 7, smooth_target);
    const FeatureTable val = random_table(100, 4, 8, smooth_target);
    const GmdhModel a = train_gmdh(train, val);
    const GmdhModel b = train_gmdh(train, val);
    CHECK(to_json(a).dump() == to_json(b).dump());
}

TEST_CASE("ties are broken by input pair order") {
    // x3 duplicates x2, so pairs (0,1) and (0,2) score identically.
    FeatureTable t = random_table(100, 2, 9, exact_quadratic);
    t.names.push_back("x3");
    t.columns.push_back(t.columns[1]);
    GmdhConfig cfg;
    cfg.max_layers = 1;
    cfg.ridge = 0.0;
    const GmdhModel m = train_gmdh(t, t, cfg);
    CHECK(m.layers[0][0].input_a == 0);
    CHECK(m.layers[0][0].input_b == 1);
    CHECK(m.layers[0][1].input_a == 0);
    CHECK(m.layers[0][1].input_b == 2);
}

TEST_CASE("train_gmdh input validation") {
    const FeatureTable train = random_table(50, 2, 1, exact_quadratic);
    FeatureTable one = train;
    one.names.pop_back();
    one.columns.pop_back();
    CHECK_THROWS_AS(train_gmdh(one, one), ConfigError);
    FeatureTable empty = train;
    for (auto& c : empty.columns) c.clear();
    empty.target.clear();
    CHECK_THROWS_AS(train_gmdh(train, empty), ConfigError);
    GmdhConfig bad;
    bad.neurons_kept = 0;
    CHECK_THROWS_AS(train_gmdh(train, train, bad), ConfigError);
}

TEST_CASE("prediction replays the training-time neuron outputs") {
    const FeatureTable train = random_table(300, 4, 31, smooth_target);
    const FeatureTable val = random_table(100, 4, 32, smooth_target);
    const GmdhModel m = train_gmdh(train, val);
    double se = 0.0;
    for (std::size_t i = 0; i < val.rows(); ++i) {
        const std::vector<double> x{val.columns[0][i], val.columns[1][i], val.columns[2][i], val.columns[3][i]};
        const double e = predict_gmdh(m, x) - val.target[i];
        se += e * e;
    }
    CHECK(se / val.rows() == Approx(m.layers.back()[m.output_neuron].external_criterion).epsilon(1e-9));
    CHECK_THROWS_AS(predict_gmdh(m, std::vector<double>{1.0, 2.0}), ModelError);
}

TEST_CASE("polynomial export matches the network") {
    const FeatureTable train = random_table(300, 4, 41, smooth_target);
    const FeatureTable val = random_table(100, 4, 42, smooth_target);
    GmdhConfig cfg;
    cfg.max_layers = 3;
    const GmdhModel m = train_gmdh(train, val, cfg);
    const VkgPolynomial poly = export_polynomial(m);
    CHECK(total_degree(poly) <= (1 << m.layers.size()));
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const std::vector<double> x{u(rng), u(rng), u(rng), u(rng)};
        const double net = predict_gmdh(m, x);
        CHECK(evaluate_polynomial(poly, x) == Approx(net).epsilon(1e-9));
    }
}

TEST_CASE("a single neuron exports to its own coefficients") {
    GmdhModel m;
    m.feature_names = {"a", "b"};
    GmdhNeuron n;
    n.beta = {1, 2, 3, 4, 5, 6};
    m.layers = {{n}};
    const VkgPolynomial p = export_polynomial(m);
    CHECK(p.at({0, 0}) == 1.0);
    CHECK(p.at({1, 0}) == 2.0);
    CHECK(p.at({2, 0}) == 3.0);
    CHECK(p.at({1, 1}) == 4.0);
    CHECK(p.at({0, 2}) == 5.0);
    CHECK(p.at({0, 1}) == 6.0);
    CHECK(total_degree(p) == 2);
}

TEST_CASE("export over budget is refused") {
    const FeatureTable train = random_table(300, 4, 51, smooth_target);
    const FeatureTable val = random_table(100, 4, 52, smooth_target);
    GmdhConfig cfg;
    cfg.max_layers = 3;
    const GmdhModel m = train_gmdh(train, val, cfg);
    REQUIRE(m.layers.size() >= 2);
    CHECK_THROWS_AS(export_polynomial(m, 5), ExportTooLarge);
}

TEST_CASE("model JSON round trip") {
    const FeatureTable train = random_table(300, 4, 61, smooth_target);
    const FeatureTable val = random_table(100, 4, 62, smooth_target);
    GmdhConfig cfg;
    cfg.max_layers = 2;
    GmdhModel m = train_gmdh(train, val, cfg);
    m.expanded = export_polynomial(m);
    const GmdhModel r = gmdh_from_json(nlohmann::json::parse(to_json(m).dump()));
    CHECK(to_json(r).dump() == to_json(m).dump());
    const std::vector<double> x{0.1, -0.2, 0.3, 0.4};
    CHECK(predict_gmdh(r, x) == predict_gmdh(m, x));
    CHECK(evaluate_polynomial(*r.expanded, x) == evaluate_polynomial(*m.expanded, x));

    nlohmann::json broken = to_json(m);
    broken["layers"][1][0]["inputs"] = {3, 99};
    CHECK_THROWS_AS(gmdh_from_json(broken), ModelError);
    CHECK_THROWS_AS(gmdh_from_json(nlohmann::json{{"kind", "mlp"}}), FormatError);
}
