#include "llc/simulator.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>

#include "llc/errors.hpp"

namespace llc {

void SimConfig::validate() const {
    if (steps_per_period < 100) throw ConfigError("sim.steps_per_period must be >= 100");
    if (max_periods < 10) throw ConfigError("sim.max_periods must be >= 10");
    if (!(convergence_tol > 0.0)) throw ConfigError("sim.convergence_tol must be > 0");
    if (!(rectifier_mode_hysteresis >= 0.0)) {
        throw ConfigError("sim.rectifier_mode_hysteresis must be >= 0");
    }
}

namespace {

using Vec4 = std::array<double, 4>;

Vec4 to_vec(const TankState& s) { return {s.i_Lr, s.v_Cr, s.i_Lm, s.v_Co}; }
TankState to_state(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }

double inf_norm(const Vec4& v) {
    double m = 0.0;
    for (double e : v) m = std::max(m, std::abs(e));
    return m;
}

bool all_finite(const Vec4& v) {
    return std::all_of(v.begin(), v.end(), [](double e) { return std::isfinite(e); });
}

constexpr double kNormFloor = 1e-12;

// Rectifier conduction polarity: +1 / -1 while the bridge conducts, 0 while blocked.
using Polarity = int;

struct PeriodStats {
    double mean_v_co = 0.0;
    double input_power = 0.0;
    double output_power = 0.0;
};

class LlcCircuit {
public:
    LlcCircuit(const CircuitParams& p, double f_s, const SimConfig& cfg)
        : p_(p),
          period_(1.0 / f_s),
          steps_(cfg.steps_per_period),
          h_(period_ / cfg.steps_per_period),
          hyst_(cfg.rectifier_mode_hysteresis) {}

    double period() const { return period_; }
    double step() const { return h_; }

    // Voltage the magnetizing branch would see with the rectifier blocked.
    double blocked_magnetizing_voltage(const Vec4& x, double v_ab) const {
        const double lm = p_.magnetizing_inductance;
        return lm * (v_ab - x[1]) / (p_.resonant_inductance + lm);
    }

    // Positive when the blocked bridge would be forward biased.
    double forward_bias(const Vec4& x, double v_ab) const {
        return std::abs(blocked_magnetizing_voltage(x, v_ab)) - p_.turn_ratio * x[3];
    }

    Polarity select_mode(const Vec4& x, double v_ab) const {
        const double diff = x[0] - x[2];
        if (std::abs(diff) > hyst_) return diff > 0.0 ? 1 : -1;
        if (forward_bias(x, v_ab) > 0.0) return blocked_magnetizing_voltage(x, v_ab) > 0.0 ? 1 : -1;
        return 0;
    }

    Vec4 deriv(const Vec4& x, double v_ab, Polarity s) const {
        const double lr = p_.resonant_inductance;
        const double lm = p_.magnetizing_inductance;
        const double n = p_.turn_ratio;
        const double co = p_.output_capacitance;
        const double ro = p_.load_resistance;
        Vec4 d{};
        d[1] = x[0] / p_.resonant_capacitance;
        if (s == 0) {
            const double di = (v_ab - x[1]) / (lr + lm);
            d[0] = di;
            d[2] = di;
            d[3] = -x[3] / (ro * co);
        } else {
            const double v_m = s * n * x[3];
            d[0] = (v_ab - x[1] - v_m) / lr;
            d[2] = v_m / lm;
            d[3] = (n * s * (x[0] - x[2]) - x[3] / ro) / co;
        }
        return d;
    }

    Vec4 rk4(const Vec4& x, double v_ab, Polarity s, double h) const {
        auto axpy = [](const Vec4& a, double c, const Vec4& b) {
            return Vec4{a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2], a[3] + c * b[3]};
        };
        const Vec4 k1 = deriv(x, v_ab, s);
        const Vec4 k2 = deriv(axpy(x, 0.5 * h, k1), v_ab, s);
        const Vec4 k3 = deriv(axpy(x, 0.5 * h, k2), v_ab, s);
        const Vec4 k4 = deriv(axpy(x, h, k3), v_ab, s);
        Vec4 y;
        for (int i = 0; i < 4; ++i) y[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        return y;
    }

    // Advances x by h at constant drive voltage, switching rectifier mode at
    // located events (current zero crossing on exit, forward bias on entry).
    void advance(Vec4& x, Polarity& s, double v_ab, double h) const {
        double remaining = h;
        for (int events = 0; events < 8 && remaining > 1e-9 * h_; ++events) {
            if (s == 0 && forward_bias(x, v_ab) > 0.0) {
                s = blocked_magnetizing_voltage(x, v_ab) > 0.0 ? 1 : -1;
            }
            const Vec4 y = rk4(x, v_ab, s, remaining);
            std::function<double(const Vec4&)> event;
            if (s != 0) {
                const Polarity pol = s;
                event = [pol](const Vec4& z) { return pol * (z[0] - z[2]); };
                if (!(event(y) < 0.0)) {
                    x = y;
                    return;
                }
            } else {
                event = [this, v_ab](const Vec4& z) { return -forward_bias(z, v_ab); };
                if (!(event(y) < 0.0)) {
                    x = y;
                    return;
                }
            }
            const double theta = locate(x, v_ab, s, remaining, event, event(x), event(y));
            x = rk4(x, v_ab, s, theta * remaining);
            remaining -= theta * remaining;
            if (s != 0) {
                x[2] = x[0];
                s = 0;
            } else {
                s = blocked_magnetizing_voltage(x, v_ab) > 0.0 ? 1 : -1;
            }
        }
        if (remaining > 1e-9 * h_) x = rk4(x, v_ab, s, remaining);
    }

    // One switching period: +V_in for the first half, -V_in for the second.
    template <typename Sink>
    void run_period(Vec4& x, Polarity& s, Sink&& sink) const {
        const double v = p_.input_voltage;
        for (int k = 0; k < steps_; ++k) {
            const Vec4 x0 = x;
            if (2 * k + 2 <= steps_) {
                advance(x, s, v, h_);
                sink(k, x0, x, v);
            } else if (2 * k >= steps_) {
                advance(x, s, -v, h_);
                sink(k, x0, x, -v);
            } else {
                // Odd step count: the drive reverses mid-step.
                const double split = 0.5 * period_ - k * h_;
                advance(x, s, v, split);
                advance(x, s, -v, h_ - split);
                sink(k, x0, x, 0.0);
            }
        }
        if (!all_finite(x)) {
            throw SimulationFault("non-finite circuit state after integrating a switching period");
        }
    }

    void run_period(Vec4& x, Polarity& s) const {
        run_period(x, s, [](int, const Vec4&, const Vec4&, double) {});
    }

    PeriodStats run_period_with_stats(Vec4& x, Polarity& s) const {
        double v_sum = 0.0, pin_sum = 0.0, pout_sum = 0.0;
        const double ro = p_.load_resistance;
        run_period(x, s, [&](int, const Vec4& a, const Vec4& b, double v_ab) {
            v_sum += 0.5 * (a[3] + b[3]);
            pin_sum += v_ab * 0.5 * (a[0] + b[0]);
            pout_sum += 0.5 * (a[3] * a[3] + b[3] * b[3]) / ro;
        });
        return {v_sum / steps_, pin_sum / steps_, pout_sum / steps_};
    }

    // Period map from a boundary state with a fixed starting rectifier mode.
    Vec4 period_map(const Vec4& x0, Polarity s) const {
        Vec4 x = x0;
        if (s == 0) x[2] = x[0];
        run_period(x, s);
        return x;
    }

    Vec4 scales() const {
        const double v = p_.input_voltage;
        const double i = v / p_.characteristic_impedance();
        return {i, v, i, v};
    }

private:
    double locate(const Vec4& x, double v_ab, Polarity s, double h,
                  const std::function<double(const Vec4&)>& event, double f0, double f1) const {
        // Illinois regula falsi for the crossing of event() on [0, 1].
        double a = 0.0, b = 1.0;
        double fa = f0, fb = f1;
        if (fa <= 0.0) return 0.0;
        const double ftol = 1e-14 * (std::abs(f0) + std::abs(f1));
        int side = 0;
        for (int it = 0; it < 60; ++it) {
            const double c = (a * fb - b * fa) / (fb - fa);
            const double fc = event(rk4(x, v_ab, s, c * h));
            if (std::abs(fc) <= ftol || (b - a) < 1e-15) return c;
            if (fc > 0.0) {
                a = c;
                fa = fc;
                if (side == 1) fb *= 0.5;
                side = 1;
            } else {
                b = c;
                fb = fc;
                if (side == -1) fa *= 0.5;
                side = -1;
            }
        }
        return 0.5 * (a + b);
    }

    CircuitParams p_;
    double period_;
    int steps_;
    double h_;
    double hyst_;
};

double relative_change(const Vec4& now, const Vec4& before) {
    Vec4 d;
    for (int i = 0; i < 4; ++i) d[i] = now[i] - before[i];
    return inf_norm(d) / (inf_norm(now) + kNormFloor);
}

// Newton iteration on F(x) = P(x) - x with a forward-difference Jacobian.
// Returns the best state found; `periods` accumulates period-map evaluations.
Vec4 shoot(const LlcCircuit& circuit, Vec4 x, Polarity s, double tol, int budget, int& periods) {
    const Vec4 scale = circuit.scales();
    auto residual = [&](const Vec4& z, Vec4& px) {
        px = circuit.period_map(z, s);
        ++periods;
        Vec4 r;
        for (int i = 0; i < 4; ++i) r[i] = px[i] - z[i];
        return r;
    };
    auto weighted = [&](const Vec4& r) {
        double m = 0.0;
        for (int i = 0; i < 4; ++i) m = std::max(m, std::abs(r[i]) / scale[i]);
        return m;
    };

    Vec4 px;
    Vec4 r = residual(x, px);
    double rnorm = weighted(r);
    for (int iter = 0; iter < 30 && periods + 6 <= budget; ++iter) {
        if (relative_change(px, x) < 1e-3 * tol) break;
        Eigen::Matrix4d jac;
        for (int j = 0; j < 4; ++j) {
            Vec4 xp = x;
            const double delta = 1e-7 * scale[j];
            xp[j] += delta;
            Vec4 pxp;
            const Vec4 rp = residual(xp, pxp);
            for (int i = 0; i < 4; ++i) jac(i, j) = (rp[i] - r[i]) / delta;
        }
        Eigen::Vector4d rhs(r[0], r[1], r[2], r[3]);
        const Eigen::Vector4d dx = jac.partialPivLu().solve(-rhs);
        if (!dx.allFinite()) break;

        bool improved = false;
        double lambda = 1.0;
        for (int ls = 0; ls < 6 && periods < budget; ++ls, lambda *= 0.5) {
            Vec4 xn;
            for (int i = 0; i < 4; ++i) xn[i] = x[i] + lambda * dx[i];
            Vec4 pxn;
            const Vec4 rn = residual(xn, pxn);
            const double nn = weighted(rn);
            if (all_finite(rn) && nn < rnorm) {
                x = xn;
                px = pxn;
                r = rn;
                rnorm = nn;
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }
    return x;
}

struct SteadyState {
    Vec4 x{};
    Polarity s = 0;
    GainResult result;
    PeriodStats stats;
};

SteadyState reach_steady_state(const LlcCircuit& circuit, const CircuitParams& params,
                               const SimConfig& config) {
    constexpr int kWarmupPeriods = 40;
    constexpr int kShootingStride = 10;
    SteadyState out;
    Vec4 x{};
    Polarity s = circuit.select_mode(x, params.input_voltage);
    int periods = 0;

    auto plain_until_converged = [&](int limit) {
        Vec4 prev = x;
        double change = 0.0;
        while (periods < limit) {
            prev = x;
            out.stats = circuit.run_period_with_stats(x, s);
            ++periods;
            change = relative_change(x, prev);
            out.result.periodicity_residual = change;
            if (change < config.convergence_tol) return true;
        }
        return false;
    };

    bool converged = false;
    if (config.shooting) {
        // Alternate plain stepping (lets the tank settle into its mode
        // pattern) with Newton shooting (removes the slow output transient).
        int stride = kWarmupPeriods;
        while (!converged && periods < config.max_periods) {
            converged = plain_until_converged(std::min(periods + stride, config.max_periods));
            if (converged || periods + 10 > config.max_periods) continue;
            x = shoot(circuit, x, s, config.convergence_tol, config.max_periods - 4, periods);
            if (s == 0) x[2] = x[0];
            stride = kShootingStride;
        }
    } else {
        converged = plain_until_converged(config.max_periods);
    }

    out.x = x;
    out.s = s;
    out.result.periods_used = periods;
    out.result.converged = converged;
    out.result.mean_output_voltage = out.stats.mean_v_co;
    out.result.input_power = out.stats.input_power;
    out.result.output_power = out.stats.output_power;
    out.result.gain = params.turn_ratio * out.stats.mean_v_co / params.input_voltage;
    return out;
}

void check_inputs(const CircuitParams& params, double f_s, const SimConfig& config) {
    params.validate();
    if (!(f_s > 0.0) || !std::isfinite(f_s)) {
        throw DomainError("switching_frequency must be positive and finite");
    }
    config.validate();
}

}  // namespace

double state_distance(const TankState& a, const TankState& b) {
    return relative_change(to_vec(a), to_vec(b));
}

GainResult simulate_gain(const CircuitParams& params, double switching_frequency,
                         const SimConfig& config) {
    check_inputs(params, switching_frequency, config);
    const LlcCircuit circuit(params, switching_frequency, config);
    return reach_steady_state(circuit, params, config).result;
}

Waveform simulate_waveform(const CircuitParams& params, double switching_frequency,
                           const SimConfig& config, int periods) {
    check_inputs(params, switching_frequency, config);
    if (periods < 1) throw ConfigError("waveform period count must be >= 1");
    const LlcCircuit circuit(params, switching_frequency, config);
    SteadyState ss = reach_steady_state(circuit, params, config);

    Waveform w;
    w.summary = ss.result;
    const double t0 = ss.result.periods_used * circuit.period();
    w.samples.reserve(static_cast<std::size_t>(periods) * config.steps_per_period + 1);
    w.samples.push_back({t0, to_state(ss.x)});
    for (int p = 0; p < periods; ++p) {
        const double tp = t0 + p * circuit.period();
        circuit.run_period(ss.x, ss.s, [&](int k, const Vec4&, const Vec4& b, double) {
            w.samples.push_back({tp + (k + 1) * circuit.step(), to_state(b)});
        });
    }
    return w;
}

}  // namespace llc
