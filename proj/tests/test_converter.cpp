#include <doctest.h>

#include <cmath>
#include <random>

#include "llc/converter.hpp"
#include "llc/errors.hpp"
#include "llc/pipeline.hpp"

using namespace llc;
using doctest::Approx;

namespace {

// Values below were evaluated independently at 30 digits.
constexpr double kAlphaLow = 0.0666296604652769562;   // f_n=0.5, L_n=2, Q=0.1
constexpr double kAlphaHigh = 0.421175079807769851;   // f_n=1.5, L_n=4, Q=0.4
constexpr double kFhaLow = 1.91565257044230279;       // conventional, f_n=0.5, L_n=2, Q=0.1
constexpr double kFhaHigh = 0.842696259812140060;     // conventional, f_n=1.5, L_n=4, Q=0.4
constexpr double kFrTrain = 20546.8148020499935;
constexpr double kFrValidation = 30800.9776041313963;

CircuitParams circuit(double L_M, double L_r, double C_r, double R_o) {
    CircuitParams c;
    c.magnetizing_inductance = L_M;
    c.resonant_inductance = L_r;
    c.resonant_capacitance = C_r;
    c.output_capacitance = 220e-6;
    c.load_resistance = R_o;
    return c;
}

}  // namespace

TEST_CASE("resonant frequency of the preset tanks") {
    CHECK(circuit(300e-6, 150e-6, 0.4e-6, 10).resonant_frequency() == Approx(kFrTrain).epsilon(1e-12));
    CHECK(circuit(200e-6, 100e-6, 0.267e-6, 10).resonant_frequency() == Approx(kFrValidation).epsilon(1e-12));
    CHECK(table1_train_circuit().resonant_frequency() == Approx(kFrTrain).epsilon(1e-12));
    CHECK(table1_validation_circuit().resonant_frequency() == Approx(kFrValidation).epsilon(1e-12));
}

TEST_CASE("normalize recovers L_n, Q and f_n") {
    const CircuitParams c = circuit(300e-6, 150e-6, 0.4e-6, 19.3649167310370844);
    const OperatingPoint p = normalize(c, kFrTrain);
    CHECK(p.L_n == Approx(2.0).epsilon(1e-15));
    CHECK(p.Q == Approx(1.0).epsilon(1e-12));
    CHECK(p.f_n == Approx(1.0).epsilon(1e-12));
    CHECK(p.f_r == Approx(kFrTrain).epsilon(1e-12));

    CircuitParams c2 = c;
    c2.turn_ratio = 2.0;
    CHECK(normalize(c2, kFrTrain).Q == Approx(0.25).epsilon(1e-12));
}

TEST_CASE("realize inverts normalize") {
    const CircuitParams base = table1_train_circuit();
    for (double ln : {1.5, 2.0, 5.0})
        for (double q : {0.1, 0.45, 0.8}) {
            const CircuitParams c = realize(base, ln, q);
            const OperatingPoint p = normalize(c, 0.7 * c.resonant_frequency());
            CHECK(p.L_n == Approx(ln).epsilon(1e-13));
            CHECK(p.Q == Approx(q).epsilon(1e-13));
            CHECK(p.f_n == Approx(0.7).epsilon(1e-13));
        }
}

TEST_CASE("circuit validation names the offending field") {
    CircuitParams c = circuit(300e-6, 150e-6, 0.4e-6, 10);
    c.resonant_capacitance = 0.0;
    try {
        c.validate();
        FAIL("expected DomainError");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("resonant_capacitance") != std::string::npos);
    }
    c = circuit(300e-6, -1.0, 0.4e-6, 10);
    CHECK_THROWS_AS(c.validate(), DomainError);
    c = circuit(300e-6, 150e-6, 0.4e-6, std::nan(""));
    CHECK_THROWS_AS(c.validate(), DomainError);
    CHECK_THROWS_AS(normalize(circuit(300e-6, 150e-6, 0.4e-6, 10), 0.0), DomainError);
}

TEST_CASE("alpha feature at the reference points") {
    AlphaFeature a = alpha_feature(make_point(0.5, 2.0, 0.1));
    CHECK(a.A == Approx(-0.5).epsilon(1e-15));
    CHECK(a.B == Approx(-15.0).epsilon(1e-15));
    CHECK(a.alpha == Approx(kAlphaLow).epsilon(1e-14));

    a = alpha_feature(make_point(1.5, 4.0, 0.4));
    CHECK(a.A == Approx(1.13888888888888889).epsilon(1e-14));
    CHECK(a.B == Approx(2.08333333333333333).epsilon(1e-14));
    CHECK(a.alpha == Approx(kAlphaHigh).epsilon(1e-14));
}

TEST_CASE("alpha is exactly one at resonance") {
    for (double ln : {0.5, 2.0, 7.0})
        for (double q : {0.05, 0.4, 3.0}) {
            const AlphaFeature a = alpha_feature(make_point(1.0, ln, q));
            CHECK(a.A == 1.0);
            CHECK(a.B == 0.0);
            CHECK(a.alpha == 1.0);
            CHECK(fha_gain(make_point(1.0, ln, q), FhaForm::conventional) == 1.0);
            CHECK(fha_gain(make_point(1.0, ln, q), FhaForm::paper) == 1.0);
        }
}

TEST_CASE("fha gain forms") {
    CHECK(fha_gain(make_point(0.5, 2.0, 0.1), FhaForm::conventional) == Approx(kFhaLow).epsilon(1e-14));
    CHECK(fha_gain(make_point(1.5, 4.0, 0.4), FhaForm::conventional) == Approx(kFhaHigh).epsilon(1e-14));
    CHECK(fha_gain(make_point(0.5, 2.0, 0.1), FhaForm::paper) == alpha_feature(make_point(0.5, 2.0, 0.1)).alpha);
}

TEST_CASE("zero or negative coordinates are rejected") {
    CHECK_THROWS_AS(alpha_feature(OperatingPoint{0.0, 2.0, 0.1}), DomainError);
    CHECK_THROWS_AS(alpha_feature(OperatingPoint{1.0, 0.0, 0.1}), DomainError);
    CHECK_THROWS_AS(alpha_feature(OperatingPoint{1.0, 2.0, 0.0}), DomainError);
    CHECK_THROWS_AS(fha_gain(OperatingPoint{1.0, 2.0, 0.0}, FhaForm::conventional), DomainError);
    CHECK_THROWS_AS(make_point(-1.0, 2.0, 0.1), DomainError);
}

TEST_CASE("relative error sign and zero reference") {
    CHECK(relative_error(1.0, 1.0) == 0.0);
    CHECK(relative_error(1.1, 1.0) == Approx(0.1).epsilon(1e-14));
    CHECK(relative_error(0.9, 1.0) == Approx(-0.1).epsilon(1e-14));
    CHECK_THROWS_AS(relative_error(1.0, 0.0), DomainError);
}

TEST_CASE("alpha identity on random points") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> fn(0.4, 2.0), ln(1.0, 10.0), q(0.05, 1.0);
    for (int i = 0; i < 2000; ++i) {
        const OperatingPoint p = make_point(fn(rng), ln(rng), q(rng));
        const AlphaFeature a = alpha_feature(p);
        CHECK(a.alpha > 0.0);
        CHECK(a.alpha * std::hypot(a.A, a.B) == Approx(1.0).epsilon(1e-14));
        // The two forms coincide when Q = 1.
        const OperatingPoint p1 = make_point(p.f_n, p.L_n, 1.0);
        CHECK(fha_gain(p1, FhaForm::paper) == Approx(fha_gain(p1, FhaForm::conventional)).epsilon(1e-14));
    }
}

TEST_CASE("source names round-trip") {
    for (Source s : {Source::simulator, Source::mlp, Source::gmdh, Source::fha})
        CHECK(source_from_string(to_string(s)) == s);
    CHECK_THROWS_AS(source_from_string("spice"), ParseError);
}
