#pragma once

#include <string_view>

namespace llc {

/// Physical element values of a full-bridge LLC converter, all in SI units.
struct CircuitParams {
    double magnetizing_inductance = 0.0;  // L_M [H]
    double resonant_inductance = 0.0;     // L_r [H]
    double resonant_capacitance = 0.0;    // C_r [F]
    double turn_ratio = 1.0;              // n = N_p / N_s
    double output_capacitance = 0.0;      // C_o [F]
    double load_resistance = 0.0;         // R_o [ohm]
    double input_voltage = 100.0;         // V_in [V]

    /// Throws DomainError naming the first non-positive field.
    void validate() const;

    double resonant_frequency() const;
    double characteristic_impedance() const;
};

/// Normalized coordinates of an operating point.
struct OperatingPoint {
    double f_n = 1.0;
    double L_n = 1.0;
    double Q = 1.0;
    double f_r = 0.0;  // [Hz], zero when the point was built without a circuit
    double f_s = 0.0;  // [Hz]
};

struct AlphaFeature {
    double A = 1.0;
    double B = 0.0;
    double alpha = 1.0;
};

enum class Source { simulator, mlp, gmdh, fha };

std::string_view to_string(Source s);
Source source_from_string(std::string_view s);

struct GainSample {
    OperatingPoint point;
    double alpha = 1.0;
    double gain = 1.0;
    Source source = Source::simulator;
};

enum class FhaForm { paper, conventional };

OperatingPoint normalize(const CircuitParams& params, double switching_frequency);

/// Operating point in normalized coordinates only (f_r and f_s left zero).
OperatingPoint make_point(double f_n, double L_n, double Q);

/// Circuit realizing (L_n, Q) on top of a base circuit: L_M = L_n * L_r and
/// R_o = Z_0 / (n^2 Q). Other elements are copied from the base.
CircuitParams realize(const CircuitParams& base, double L_n, double Q);

AlphaFeature alpha_feature(const OperatingPoint& point);

/// form=paper returns alpha verbatim (B scaled by 1/Q); form=conventional uses
/// the textbook first-harmonic gain with Q multiplying the detuning term.
double fha_gain(const OperatingPoint& point, FhaForm form);

/// Signed (G_hybrid - G_RT) / G_RT.
double relative_error(double g_hybrid, double g_rt);

}  // namespace llc
