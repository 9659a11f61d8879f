#include "llc/converter.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "llc/errors.hpp"

namespace llc {

namespace {

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw DomainError(std::string(name) + " must be positive and finite, got " +
                          std::to_string(v));
    }
}

void require_nonzero(double v, const char* name) {
    if (v == 0.0 || !std::isfinite(v)) {
        throw DomainError(std::string(name) + " must be nonzero and finite");
    }
}

}  // namespace

void CircuitParams::validate() const {
    require_positive(magnetizing_inductance, "magnetizing_inductance");
    require_positive(resonant_inductance, "resonant_inductance");
    require_positive(resonant_capacitance, "resonant_capacitance");
    require_positive(turn_ratio, "turn_ratio");
    require_positive(output_capacitance, "output_capacitance");
    require_positive(load_resistance, "load_resistance");
    require_positive(input_voltage, "input_voltage");
}

double CircuitParams::resonant_frequency() const {
    return 1.0 / (2.0 * std::numbers::pi * std::sqrt(resonant_inductance * resonant_capacitance));
}

double CircuitParams::characteristic_impedance() const {
    return std::sqrt(resonant_inductance / resonant_capacitance);
}

std::string_view to_string(Source s) {
    switch (s) {
        case Source::simulator: return "simulator";
        case Source::mlp: return "mlp";
        case Source::gmdh: return "gmdh";
        case Source::fha: return "fha";
    }
    return "unknown";
}

Source source_from_string(std::string_view s) {
    if (s == "simulator") return Source::simulator;
    if (s == "mlp") return Source::mlp;
    if (s == "gmdh") return Source::gmdh;
    if (s == "fha") return Source::fha;
    throw ParseError("unknown sample source '" + std::string(s) + "'");
}

OperatingPoint normalize(const CircuitParams& params, double switching_frequency) {
    params.validate();
    require_positive(switching_frequency, "switching_frequency");
    const double n = params.turn_ratio;
    OperatingPoint p;
    p.L_n = params.magnetizing_inductance / params.resonant_inductance;
    p.Q = params.characteristic_impedance() / (n * n * params.load_resistance);
    p.f_r = params.resonant_frequency();
    p.f_s = switching_frequency;
    p.f_n = switching_frequency / p.f_r;
    return p;
}

OperatingPoint make_point(double f_n, double L_n, double Q) {
    require_positive(f_n, "f_n");
    require_positive(L_n, "L_n");
    require_positive(Q, "Q");
    return OperatingPoint{f_n, L_n, Q, 0.0, 0.0};
}

CircuitParams realize(const CircuitParams& base, double L_n, double Q) {
    require_positive(L_n, "L_n");
    require_positive(Q, "Q");
    CircuitParams c = base;
    c.magnetizing_inductance = L_n * base.resonant_inductance;
    c.load_resistance =
        base.characteristic_impedance() / (base.turn_ratio * base.turn_ratio * Q);
    c.validate();
    return c;
}

AlphaFeature alpha_feature(const OperatingPoint& point) {
    require_nonzero(point.f_n, "f_n");
    require_nonzero(point.L_n, "L_n");
    require_nonzero(point.Q, "Q");
    const double fn = point.f_n;
    AlphaFeature a;
    a.A = 1.0 + (1.0 / point.L_n) * (1.0 - 1.0 / (fn * fn));
    a.B = (fn - 1.0 / fn) * (1.0 / point.Q);
    a.alpha = 1.0 / std::sqrt(a.A * a.A + a.B * a.B);
    return a;
}

double fha_gain(const OperatingPoint& point, FhaForm form) {
    const AlphaFeature a = alpha_feature(point);
    if (form == FhaForm::paper) return a.alpha;
    const double detune = point.Q * (point.f_n - 1.0 / point.f_n);
    return 1.0 / std::sqrt(a.A * a.A + detune * detune);
}

double relative_error(double g_hybrid, double g_rt) {
    require_nonzero(g_rt, "G_RT");
    return (g_hybrid - g_rt) / g_rt;
}

}  // namespace llc
