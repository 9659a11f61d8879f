#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "llc/converter.hpp"
#include "llc/gmdh.hpp"
#include "llc/mlp.hpp"
#include "llc/simulator.hpp"

namespace llc {

/// Converter element values used for the training and validation datasets.
/// L_M and R_o are placeholders; each sweep point overrides them from (L_n, Q).
CircuitParams table1_train_circuit();
CircuitParams table1_validation_circuit();

/// Grid in normalized coordinates on top of a base circuit. The (L_n, Q)
/// settings are either explicit pairs or the cross product of the two lists.
struct SweepSpec {
    double fn_lo = 0.5;
    double fn_hi = 1.5;
    int fn_count = 41;
    std::vector<double> ln_values;
    std::vector<double> q_values;
    std::vector<std::pair<double, double>> pairs;
    CircuitParams base = table1_train_circuit();
    std::string preset = "table1";

    void validate() const;
    std::vector<std::pair<double, double>> settings() const;
    std::vector<double> fn_values() const;
    /// Row-major over settings, then f_n. f_r and f_s come from `base`.
    std::vector<OperatingPoint> points() const;
};

SweepSpec default_training_sweep();
SweepSpec default_dense_sweep();
/// Validation circuit at the three comparison settings (2, 0.1), (4, 0.4), (2, 0.8).
SweepSpec default_evaluation_sweep();
SweepSpec preset_sweep(const std::string& name);

/// Runs the simulator for one normalized point on a base circuit.
GainResult simulate_point(const CircuitParams& base, double f_n, double L_n, double Q, const SimConfig& config);

struct GenerationOptions {
    unsigned threads = 0;                   // 0 = hardware concurrency
    double max_failure_fraction = 0.10;
};

/// Simulator samples for every grid point; non-converged points are dropped
/// with a warning. Throws SimulationFault when more than 10% fail.
std::vector<GainSample> generate_training_data(const SweepSpec& spec, const SimConfig& sim,
                                               const GenerationOptions& options = {});

/// Deterministic 80/20 split stratified along f_n: within each (L_n, Q)
/// setting, every fifth point (sorted by f_n) goes to validation.
std::pair<std::vector<GainSample>, std::vector<GainSample>> stratified_split(std::span<const GainSample> samples);

/// Names accepted in a GMDH feature list.
const std::vector<std::string>& known_features();
std::vector<std::string> default_features();
double feature_value(const std::string& name, const OperatingPoint& point);
std::vector<double> feature_vector(const std::vector<std::string>& names, const OperatingPoint& point);
FeatureTable feature_table(const std::vector<std::string>& names, std::span<const GainSample> samples);

double predict_gain(const GmdhModel& model, const OperatingPoint& point);

struct HybridConfig {
    SweepSpec train = default_training_sweep();
    SweepSpec dense = default_dense_sweep();
    SimConfig sim;
    MlpHyper mlp;
    GmdhConfig gmdh;
    std::vector<std::string> features = default_features();
    std::uint64_t seed = 42;
    unsigned threads = 0;
};

struct HybridResult {
    std::vector<GainSample> simulator_data;
    TrainResult mlp;
    std::vector<GainSample> synthetic_data;
    GmdhModel gmdh;
    nlohmann::json manifest;
};

/// simulate -> train-mlp -> synthesize -> train-gmdh. Stage errors are
/// rethrown with the stage name prefixed.
HybridResult run_hybrid(const HybridConfig& config);

struct ErrorRecord {
    OperatingPoint point;
    double g_rt = 0.0;
    double g_hybrid = 0.0;
    double g_fha = 0.0;
    double err_hybrid = 0.0;
    double err_fha = 0.0;
};

struct ErrorSummary {
    double max_abs = 0.0;
    double mean_abs = 0.0;
    double rms = 0.0;
};

struct ErrorReport {
    std::vector<ErrorRecord> rows;
    ErrorSummary hybrid;
    ErrorSummary fha;

    /// Recomputes both summaries from the rows.
    void summarize();
};

ErrorSummary summarize_errors(std::span<const double> errors);

using GainPredictor = std::function<double(const OperatingPoint&)>;

ErrorReport evaluate(const GainPredictor& predictor, const SweepSpec& spec, const SimConfig& sim,
                     const GenerationOptions& options = {});
ErrorReport evaluate(const GmdhModel& model, const SweepSpec& spec, const SimConfig& sim,
                     const GenerationOptions& options = {});

nlohmann::json to_json(const SweepSpec& spec);
nlohmann::json to_json(const SimConfig& sim);
nlohmann::json to_json(const MlpHyper& hyper);
nlohmann::json to_json(const GmdhConfig& config);
nlohmann::json to_json(const ErrorSummary& summary);

}  // namespace llc
