#pragma once

#include <vector>

#include "llc/converter.hpp"

namespace llc {

/// State of the full-bridge LLC circuit with a diode-bridge secondary.
struct TankState {
    double i_Lr = 0.0;  // resonant inductor current [A]
    double v_Cr = 0.0;  // resonant capacitor voltage [V]
    double i_Lm = 0.0;  // magnetizing current [A]
    double v_Co = 0.0;  // output capacitor voltage [V]
};

struct SimConfig {
    int steps_per_period = 2000;
    int max_periods = 2000;
    double convergence_tol = 1e-6;
    double rectifier_mode_hysteresis = 1e-6;  // [A]
    // Newton shooting on the one-period map before plain period stepping.
    // Plain stepping alone is kept for the convergence check either way.
    bool shooting = true;

    void validate() const;
};

struct GainResult {
    double gain = 0.0;
    int periods_used = 0;
    bool converged = false;
    double mean_output_voltage = 0.0;  // [V]
    double input_power = 0.0;          // mean v_ab * i_Lr over the final period [W]
    double output_power = 0.0;         // mean v_Co^2 / R_o over the final period [W]
    double periodicity_residual = 0.0; // relative inf-norm between the last two boundaries
};

struct WaveformSample {
    double t = 0.0;  // [s]
    TankState state;
};

struct Waveform {
    GainResult summary;
    std::vector<WaveformSample> samples;
};

/// Integrates the circuit to periodic steady state and reports
/// G = n * mean(v_Co) / V_in over the final switching period.
GainResult simulate_gain(const CircuitParams& params, double switching_frequency,
                         const SimConfig& config = {});

/// Same run as simulate_gain, then records `periods` further periods with
/// one sample per integration step (plus the closing boundary).
Waveform simulate_waveform(const CircuitParams& params, double switching_frequency,
                           const SimConfig& config, int periods);

/// Relative infinity norm used by the periodicity test.
double state_distance(const TankState& a, const TankState& b);

}  // namespace llc
