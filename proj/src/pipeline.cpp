#include "llc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

#include "llc/errors.hpp"
#include "llc/log.hpp"
#include "llc/parallel.hpp"

namespace llc {

CircuitParams table1_train_circuit() {
    CircuitParams c;
    c.resonant_inductance = 150e-6;
    c.resonant_capacitance = 0.4e-6;
    c.turn_ratio = 1.0;
    c.output_capacitance = 220e-6;
    c.magnetizing_inductance = 2.0 * c.resonant_inductance;
    c.load_resistance = c.characteristic_impedance();
    c.input_voltage = 100.0;
    return c;
}

CircuitParams table1_validation_circuit() {
    CircuitParams c = table1_train_circuit();
    c.resonant_inductance = 100e-6;
    c.resonant_capacitance = 0.267e-6;
    c.magnetizing_inductance = 2.0 * c.resonant_inductance;
    c.load_resistance = c.characteristic_impedance();
    return c;
}

void SweepSpec::validate() const {
    if (!(fn_lo > 0.0 && fn_lo < fn_hi)) throw ConfigError("sweep f_n range must satisfy 0 < lo < hi");
    if (fn_count < 2) throw ConfigError("sweep f_n count must be >= 2");
    if (pairs.empty() && (ln_values.empty() || q_values.empty())) {
        throw ConfigError("sweep needs L_n and Q values or explicit (L_n, Q) pairs");
    }
    for (const auto& [ln, q] : settings()) {
        if (!(ln > 0.0) || !(q > 0.0)) throw ConfigError("sweep L_n and Q values must be positive");
    }
    base.validate();
}

std::vector<std::pair<double, double>> SweepSpec::settings() const {
    if (!pairs.empty()) return pairs;
    std::vector<std::pair<double, double>> out;
    for (double ln : ln_values) {
        for (double q : q_values) out.emplace_back(ln, q);
    }
    return out;
}

std::vector<double> SweepSpec::fn_values() const {
    std::vector<double> v(fn_count);
    for (int i = 0; i < fn_count; ++i) {
        v[i] = fn_lo + (fn_hi - fn_lo) * static_cast<double>(i) / (fn_count - 1);
    }
    v.back() = fn_hi;
    return v;
}

std::vector<OperatingPoint> SweepSpec::points() const {
    validate();
    const double f_r = base.resonant_frequency();
    std::vector<OperatingPoint> pts;
    for (const auto& [ln, q] : settings()) {
        for (double fn : fn_values()) {
            OperatingPoint p = make_point(fn, ln, q);
            p.f_r = f_r;
            p.f_s = fn * f_r;
            pts.push_back(p);
        }
    }
    return pts;
}

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
    v.back() = hi;
    return v;
}

}  // namespace

SweepSpec default_training_sweep() {
    SweepSpec s;
    s.fn_count = 41;
    s.ln_values = {2.0, 3.0, 4.0, 5.0};
    s.q_values = {0.1, 0.2, 0.4, 0.6, 0.8};
    s.base = table1_train_circuit();
    s.preset = "table1";
    return s;
}

SweepSpec default_dense_sweep() {
    SweepSpec s = default_training_sweep();
    s.fn_count = 201;
    s.ln_values = linspace(2.0, 5.0, 7);
    s.q_values = linspace(0.1, 0.8, 9);
    return s;
}

SweepSpec default_evaluation_sweep() {
    SweepSpec s;
    s.fn_count = 41;
    s.pairs = {{2.0, 0.1}, {4.0, 0.4}, {2.0, 0.8}};
    s.base = table1_validation_circuit();
    s.preset = "table1-validation";
    return s;
}

SweepSpec preset_sweep(const std::string& name) {
    if (name == "table1") return default_training_sweep();
    if (name == "table1-validation") {
        SweepSpec s = default_training_sweep();
        s.base = table1_validation_circuit();
        s.preset = name;
        return s;
    }
    throw ConfigError("unknown preset '" + name + "' (expected table1 or table1-validation)");
}

GainResult simulate_point(const CircuitParams& base, double f_n, double L_n, double Q, const SimConfig& config) {
    const CircuitParams c = realize(base, L_n, Q);
    return simulate_gain(c, f_n * c.resonant_frequency(), config);
}

namespace {

struct PointOutcome {
    bool ok = false;
    double gain = 0.0;
    std::string failure;
};

std::string describe(const OperatingPoint& p) {
    std::ostringstream os;
    os << "(f_n=" << p.f_n << ", L_n=" << p.L_n << ", Q=" << p.Q << ")";
    return os.str();
}

// Simulates every point; failures are collected rather than thrown until the
// failure fraction is known.
std::vector<PointOutcome> simulate_points(const std::vector<OperatingPoint>& pts, const CircuitParams& base,
                                          const SimConfig& sim, const GenerationOptions& options) {
    sim.validate();
    auto outcomes = parallel_map(
        pts.size(),
        [&](std::size_t i) {
            PointOutcome o;
            const OperatingPoint& p = pts[i];
            try {
                const GainResult r = simulate_point(base, p.f_n, p.L_n, p.Q, sim);
                if (r.converged && r.gain > 0.0) {
                    o.ok = true;
                    o.gain = r.gain;
                } else {
                    std::ostringstream os;
                    os << describe(p) << " did not reach periodic steady state in " << r.periods_used
                       << " periods (residual " << r.periodicity_residual << ")";
                    o.failure = os.str();
                }
            } catch (const SimulationFault& e) {
                o.failure = describe(p) + ": " + e.what();
            }
            return o;
        },
        options.threads);

    std::vector<std::string> failures;
    for (const PointOutcome& o : outcomes) {
        if (!o.ok) failures.push_back(o.failure);
    }
    if (!failures.empty()) {
        const double frac = static_cast<double>(failures.size()) / static_cast<double>(pts.size());
        if (frac > options.max_failure_fraction) {
            std::ostringstream os;
            os << failures.size() << " of " << pts.size() << " simulator points failed:";
            for (const std::string& f : failures) os << ' ' << f << ';';
            throw SimulationFault(os.str());
        }
        for (const std::string& f : failures) log_warning("dropping simulator point " + f);
    }
    return outcomes;
}

}  // namespace

std::vector<GainSample> generate_training_data(const SweepSpec& spec, const SimConfig& sim,
                                               const GenerationOptions& options) {
    const std::vector<OperatingPoint> pts = spec.points();
    const std::vector<PointOutcome> outcomes = simulate_points(pts, spec.base, sim, options);
    std::vector<GainSample> samples;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!outcomes[i].ok) continue;
        GainSample s;
        s.point = pts[i];
        s.alpha = alpha_feature(pts[i]).alpha;
        s.gain = outcomes[i].gain;
        s.source = Source::simulator;
        samples.push_back(s);
    }
    return samples;
}

std::pair<std::vector<GainSample>, std::vector<GainSample>> stratified_split(std::span<const GainSample> samples) {
    std::map<std::pair<double, double>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        groups[{samples[i].point.L_n, samples[i].point.Q}].push_back(i);
    }
    std::vector<bool> to_val(samples.size(), false);
    for (auto& [key, idx] : groups) {
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return samples[a].point.f_n < samples[b].point.f_n; });
        for (std::size_t k = 0; k < idx.size(); ++k) {
            if (k % 5 == 2) to_val[idx[k]] = true;
        }
    }
    std::pair<std::vector<GainSample>, std::vector<GainSample>> out;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        (to_val[i] ? out.second : out.first).push_back(samples[i]);
    }
    return out;
}

const std::vector<std::string>& known_features() {
    static const std::vector<std::string> names{"alpha", "f_n", "L_n", "Q", "fha"};
    return names;
}

std::vector<std::string> default_features() { return {"alpha", "fha", "f_n", "L_n", "Q"}; }

double feature_value(const std::string& name, const OperatingPoint& point) {
    if (name == "alpha") return alpha_feature(point).alpha;
    if (name == "f_n") return point.f_n;
    if (name == "L_n") return point.L_n;
    if (name == "Q") return point.Q;
    if (name == "fha") return fha_gain(point, FhaForm::conventional);
    throw ConfigError("unknown GMDH feature '" + name + "'");
}

std::vector<double> feature_vector(const std::vector<std::string>& names, const OperatingPoint& point) {
    std::vector<double> v;
    v.reserve(names.size());
    for (const std::string& n : names) v.push_back(feature_value(n, point));
    return v;
}

FeatureTable feature_table(const std::vector<std::string>& names, std::span<const GainSample> samples) {
    FeatureTable t;
    t.names = names;
    t.columns.assign(names.size(), {});
    for (auto& c : t.columns) c.reserve(samples.size());
    t.target.reserve(samples.size());
    for (const GainSample& s : samples) {
        for (std::size_t j = 0; j < names.size(); ++j) {
            // The stored alpha is authoritative for alpha columns.
            t.columns[j].push_back(names[j] == "alpha" ? s.alpha : feature_value(names[j], s.point));
        }
        t.target.push_back(s.gain);
    }
    return t;
}

double predict_gain(const GmdhModel& model, const OperatingPoint& point) {
    return predict_gmdh(model, feature_vector(model.feature_names, point));
}

namespace {

template <typename F>
auto run_stage(const char* stage, nlohmann::json& timings, F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
        auto r = body();
        timings.push_back({{"stage", stage},
                           {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}});
        return r;
    } catch (const Error& e) {
        throw Error(e.kind(), std::string("stage ") + stage + ": " + e.what());
    }
}

}  // namespace

HybridResult run_hybrid(const HybridConfig& config) {
    config.train.validate();
    config.dense.validate();
    config.sim.validate();
    config.gmdh.validate();
    MlpHyper hyper = config.mlp;
    hyper.seed = config.seed;
    hyper.validate();
    for (const std::string& f : config.features) feature_value(f, make_point(1.0, 1.0, 1.0));
    {
        auto range = [](const std::vector<double>& v) { return std::minmax_element(v.begin(), v.end()); };
        std::vector<double> tl, tq, dl, dq;
        for (const auto& [l, q] : config.train.settings()) tl.push_back(l), tq.push_back(q);
        for (const auto& [l, q] : config.dense.settings()) dl.push_back(l), dq.push_back(q);
        const auto [tl0, tl1] = range(tl);
        const auto [tq0, tq1] = range(tq);
        const auto [dl0, dl1] = range(dl);
        const auto [dq0, dq1] = range(dq);
        if (config.dense.fn_lo < config.train.fn_lo || config.dense.fn_hi > config.train.fn_hi || *dl0 < *tl0 ||
            *dl1 > *tl1 || *dq0 < *tq0 || *dq1 > *tq1) {
            throw ConfigError("dense sweep must lie inside the training sweep ranges");
        }
    }

    HybridResult result;
    nlohmann::json timings = nlohmann::json::array();
    GenerationOptions gen;
    gen.threads = config.threads;

    result.simulator_data = run_stage("simulate", timings, [&] {
        return generate_training_data(config.train, config.sim, gen);
    });
    auto [mlp_train, mlp_val] = stratified_split(result.simulator_data);
    result.mlp = run_stage("train-mlp", timings, [&] { return train_mlp(mlp_train, mlp_val, hyper); });
    result.synthetic_data = run_stage("synthesize", timings, [&] {
        const auto grid = config.dense.points();
        return synthesize_dataset(result.mlp.model, grid);
    });
    result.gmdh = run_stage("train-gmdh", timings, [&] {
        auto [g_train, g_val] = stratified_split(result.synthetic_data);
        return train_gmdh(feature_table(config.features, g_train), feature_table(config.features, g_val),
                          config.gmdh);
    });

    nlohmann::json& m = result.manifest;
    m["stages"] = {"simulate", "train-mlp", "synthesize", "train-gmdh"};
    m["seed"] = config.seed;
    m["config"] = {{"sim", to_json(config.sim)},
                   {"train_sweep", to_json(config.train)},
                   {"dense_sweep", to_json(config.dense)},
                   {"mlp", to_json(hyper)},
                   {"gmdh", to_json(config.gmdh)},
                   {"features", config.features}};
    m["sizes"] = {{"simulator_points", config.train.points().size()},
                  {"simulator_samples", result.simulator_data.size()},
                  {"mlp_train_rows", mlp_train.size()},
                  {"mlp_val_rows", mlp_val.size()},
                  {"synthetic_samples", result.synthetic_data.size()},
                  {"gmdh_layers", result.gmdh.layers.size()}};
    m["mlp_best_epoch"] = result.mlp.best_epoch;
    m["timings"] = timings;
    return result;
}

ErrorSummary summarize_errors(std::span<const double> errors) {
    ErrorSummary s;
    if (errors.empty()) return s;
    double sum_abs = 0.0, sum_sq = 0.0;
    for (double e : errors) {
        s.max_abs = std::max(s.max_abs, std::abs(e));
        sum_abs += std::abs(e);
        sum_sq += e * e;
    }
    const double n = static_cast<double>(errors.size());
    s.mean_abs = sum_abs / n;
    s.rms = std::sqrt(sum_sq / n);
    return s;
}

void ErrorReport::summarize() {
    std::vector<double> h, f;
    for (const ErrorRecord& r : rows) {
        h.push_back(r.err_hybrid);
        f.push_back(r.err_fha);
    }
    hybrid = summarize_errors(h);
    fha = summarize_errors(f);
}

ErrorReport evaluate(const GainPredictor& predictor, const SweepSpec& spec, const SimConfig& sim,
                     const GenerationOptions& options) {
    const std::vector<OperatingPoint> pts = spec.points();
    const std::vector<PointOutcome> outcomes = simulate_points(pts, spec.base, sim, options);
    ErrorReport report;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!outcomes[i].ok) continue;
        ErrorRecord r;
        r.point = pts[i];
        r.g_rt = outcomes[i].gain;
        r.g_hybrid = predictor(pts[i]);
        r.g_fha = fha_gain(pts[i], FhaForm::conventional);
        r.err_hybrid = relative_error(r.g_hybrid, r.g_rt);
        r.err_fha = relative_error(r.g_fha, r.g_rt);
        report.rows.push_back(r);
    }
    report.summarize();
    return report;
}

ErrorReport evaluate(const GmdhModel& model, const SweepSpec& spec, const SimConfig& sim,
                     const GenerationOptions& options) {
    model.validate();
    return evaluate([&model](const OperatingPoint& p) { return predict_gain(model, p); }, spec, sim, options);
}

nlohmann::json to_json(const SweepSpec& spec) {
    nlohmann::json j{{"preset", spec.preset},
                     {"fn_lo", spec.fn_lo},
                     {"fn_hi", spec.fn_hi},
                     {"fn_count", spec.fn_count},
                     {"ln_values", spec.ln_values},
                     {"q_values", spec.q_values}};
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& [ln, q] : spec.pairs) pairs.push_back({ln, q});
    j["pairs"] = pairs;
    const CircuitParams& c = spec.base;
    j["base"] = {{"L_r_H", c.resonant_inductance},
                 {"C_r_F", c.resonant_capacitance},
                 {"n", c.turn_ratio},
                 {"C_o_F", c.output_capacitance},
                 {"V_in_V", c.input_voltage},
                 {"f_r_Hz", c.resonant_frequency()}};
    return j;
}

nlohmann::json to_json(const SimConfig& sim) {
    return {{"steps_per_period", sim.steps_per_period},
            {"max_periods", sim.max_periods},
            {"convergence_tol", sim.convergence_tol},
            {"rectifier_mode_hysteresis", sim.rectifier_mode_hysteresis},
            {"shooting", sim.shooting}};
}

nlohmann::json to_json(const MlpHyper& hyper) {
    return {{"hidden_layers", hyper.hidden_layers}, {"width", hyper.width},
            {"learning_rate", hyper.learning_rate}, {"epochs", hyper.epochs},
            {"batch_size", hyper.batch_size},       {"seed", hyper.seed},
            {"beta1", hyper.beta1},                 {"beta2", hyper.beta2},
            {"epsilon", hyper.epsilon}};
}

nlohmann::json to_json(const GmdhConfig& config) {
    return {{"max_layers", config.max_layers},
            {"neurons_kept", config.neurons_kept},
            {"ridge", config.ridge},
            {"min_improvement", config.min_improvement},
            {"export_term_budget", config.export_term_budget}};
}

nlohmann::json to_json(const ErrorSummary& s) {
    return {{"max_abs", s.max_abs}, {"mean_abs", s.mean_abs}, {"rms", s.rms}};
}

}  // namespace llc
