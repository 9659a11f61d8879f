#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "llc/errors.hpp"
#include "llc/pipeline.hpp"
#include "llc/simulator.hpp"

using namespace llc;
using doctest::Approx;

namespace {

CircuitParams at(double ln, double q) { return realize(table1_train_circuit(), ln, q); }

}  // namespace

TEST_CASE("gain is near one at resonance") {
    for (auto [ln, q] : {std::pair{2.0, 0.1}, {4.0, 0.4}, {2.0, 0.8}}) {
        const CircuitParams c = at(ln, q);
        const GainResult g = simulate_gain(c, c.resonant_frequency());
        CHECK(g.converged);
        CHECK(std::abs(g.gain - 1.0) <= 0.03);
    }
}

TEST_CASE("below resonance at light load boosts the gain") {
    const CircuitParams c = at(2.0, 0.1);
    const GainResult g = simulate_gain(c, 0.5 * c.resonant_frequency());
    CHECK(g.converged);
    CHECK(g.gain > 1.0);
}

TEST_CASE("gain does not depend on the input voltage") {
    CircuitParams c = at(3.0, 0.4);
    const double fs = 0.8 * c.resonant_frequency();
    const GainResult a = simulate_gain(c, fs);
    c.input_voltage *= 2.0;
    const GainResult b = simulate_gain(c, fs);
    CHECK(b.gain == Approx(a.gain).epsilon(1e-9));
    CHECK(b.mean_output_voltage == Approx(2.0 * a.mean_output_voltage).epsilon(1e-9));
}

TEST_CASE("power balance of the lossless circuit") {
    for (double fn : {0.6, 1.0, 1.4}) {
        const CircuitParams c = at(4.0, 0.4);
        const GainResult g = simulate_gain(c, fn * c.resonant_frequency());
        REQUIRE(g.converged);
        CHECK(g.input_power == Approx(g.output_power).epsilon(1e-4));
    }
}

TEST_CASE("step halving changes the gain by less than 0.2%") {
    SimConfig fine;
    fine.steps_per_period = 4000;
    for (double fn : {0.5, 0.9, 1.5}) {
        const CircuitParams c = at(2.0, 0.8);
        const double fs = fn * c.resonant_frequency();
        const double g1 = simulate_gain(c, fs).gain;
        const double g2 = simulate_gain(c, fs, fine).gain;
        CHECK(std::abs(g2 - g1) / g1 < 2e-3);
    }
}

TEST_CASE("shooting and plain stepping reach the same steady state") {
    SimConfig plain;
    plain.shooting = false;
    plain.max_periods = 20000;
    const CircuitParams c = at(4.0, 0.4);
    const double fs = 1.2 * c.resonant_frequency();
    const GainResult a = simulate_gain(c, fs);
    const GainResult b = simulate_gain(c, fs, plain);
    REQUIRE(b.converged);
    CHECK(a.gain == Approx(b.gain).epsilon(1e-4));
}

TEST_CASE("steady-state waveform properties") {
    const CircuitParams c = at(2.0, 0.4);
    const SimConfig cfg;
    const Waveform w = simulate_waveform(c, 0.8 * c.resonant_frequency(), cfg, 1);
    REQUIRE(w.summary.converged);
    REQUIRE(w.samples.size() == static_cast<std::size_t>(cfg.steps_per_period) + 1);
    for (std::size_t i = 1; i < w.samples.size(); ++i) CHECK(w.samples[i].t > w.samples[i - 1].t);

    // Capacitor charge balance: v_Cr averages to zero over a period.
    double mean = 0.0, peak = 0.0;
    for (std::size_t i = 0; i + 1 < w.samples.size(); ++i) {
        mean += w.samples[i].state.v_Cr;
        peak = std::max(peak, std::abs(w.samples[i].state.v_Cr));
    }
    mean /= static_cast<double>(w.samples.size() - 1);
    CHECK(std::abs(mean) < 0.01 * peak);

    // The period boundary repeats within the convergence tolerance.
    CHECK(state_distance(w.samples.front().state, w.samples.back().state) <= 10 * cfg.convergence_tol);
}

TEST_CASE("odd step counts are handled") {
    SimConfig odd;
    odd.steps_per_period = 2001;
    const CircuitParams c = at(3.0, 0.2);
    const double fs = 0.9 * c.resonant_frequency();
    CHECK(simulate_gain(c, fs, odd).gain == Approx(simulate_gain(c, fs).gain).epsilon(1e-4));
}

TEST_CASE("too few periods is reported, not thrown") {
    SimConfig tight;
    tight.shooting = false;
    tight.max_periods = 10;
    const CircuitParams c = at(2.0, 0.1);
    const GainResult g = simulate_gain(c, 0.5 * c.resonant_frequency(), tight);
    CHECK_FALSE(g.converged);
    CHECK(g.periods_used == 10);
}

TEST_CASE("configuration and input validation") {
    SimConfig bad;
    bad.steps_per_period = 50;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = SimConfig{};
    bad.max_periods = 5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = SimConfig{};
    bad.convergence_tol = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    const CircuitParams c = at(2.0, 0.4);
    CHECK_THROWS_AS(simulate_gain(c, 0.0), DomainError);
    CHECK_THROWS_AS(simulate_gain(c, -5.0), DomainError);
    CircuitParams broken = c;
    broken.output_capacitance = 0.0;
    CHECK_THROWS_AS(simulate_gain(broken, 20e3), DomainError);
    CHECK_THROWS_AS(simulate_waveform(c, 20e3, SimConfig{}, 0), ConfigError);
}

TEST_CASE("state distance is a relative infinity norm") {
    const TankState a{1.0, 10.0, -1.0, 50.0};
    CHECK(state_distance(a, a) == 0.0);
    TankState b = a;
    b.v_Co = 50.5;
    CHECK(state_distance(a, b) > 0.0);
    CHECK(state_distance(a, b) == Approx(state_distance(b, a)).epsilon(1e-2));
}
