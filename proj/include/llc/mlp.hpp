#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "llc/converter.hpp"

namespace llc {

/// Per-feature affine standardization, x_norm = (x - mean) / stddev.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> stddev;

    double normalize(std::size_t j, double x) const { return (x - mean[j]) / stddev[j]; }
    double denormalize(std::size_t j, double z) const { return z * stddev[j] + mean[j]; }
};

struct DenseLayer {
    int inputs = 0;
    int outputs = 0;
    std::vector<double> weights;  // row-major, outputs x inputs
    std::vector<double> biases;
};

/// Dense feedforward net (f_n, L_n, Q) -> G with tanh hidden layers and an
/// identity output layer.
struct MlpModel {
    std::vector<int> layer_sizes;  // including the 3 inputs and 1 output
    std::vector<DenseLayer> layers;
    Standardizer input_norm;
    Standardizer output_norm;
    std::array<double, 3> input_min{};  // training range, for extrapolation warnings
    std::array<double, 3> input_max{};
    std::uint64_t seed = 0;
    nlohmann::json training;  // free-form training metadata

    /// Throws ModelError on inconsistent shapes or non-positive stddevs.
    void validate() const;
    std::size_t parameter_count() const;
};

struct MlpHyper {
    int hidden_layers = 3;
    int width = 32;
    double learning_rate = 1e-3;
    int epochs = 2000;
    int batch_size = 64;
    std::uint64_t seed = 42;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
};

struct EpochLoss {
    int epoch = 0;
    double train_mse = 0.0;
    double val_mse = 0.0;
};

struct TrainResult {
    MlpModel model;
    std::vector<EpochLoss> history;
    int best_epoch = 0;
};

/// Normalized training row: standardized inputs and target.
struct NormalizedRow {
    std::array<double, 3> x{};
    double y = 0.0;
};

/// Fits standardization statistics. A constant column gets stddev 1 (it is
/// only centered); throws ConfigError when every input column is constant.
Standardizer fit_input_standardizer(std::span<const GainSample> samples);
Standardizer fit_output_standardizer(std::span<const GainSample> samples);

/// Glorot-uniform hidden layers, zero output layer, identity normalization.
MlpModel init_mlp(const MlpHyper& hyper);

/// Mini-batch Adam on the MSE of standardized targets; returns the snapshot
/// with the lowest validation MSE. Deterministic for a fixed seed.
TrainResult train_mlp(std::span<const GainSample> train, std::span<const GainSample> val,
                      const MlpHyper& hyper = {});

double predict_mlp(const MlpModel& model, const OperatingPoint& point);
double predict_mlp(const MlpModel& model, double f_n, double L_n, double Q);

/// One GainSample (source=mlp, alpha from the closed-form feature) per grid
/// point. Warns when points fall outside the training ranges.
std::vector<GainSample> synthesize_dataset(const MlpModel& model, std::span<const OperatingPoint> grid);

// Parameter-vector access used by the optimizer and gradient checks. Layout:
// for each layer, weights (row-major) then biases.
std::vector<double> flatten_parameters(const MlpModel& model);
void assign_parameters(MlpModel& model, std::span<const double> params);

/// Mean squared error over `rows` in normalized units; when `gradient` is
/// non-null it receives d(loss)/d(params) in flatten_parameters order.
double normalized_loss(const MlpModel& model, std::span<const NormalizedRow> rows,
                       std::vector<double>* gradient = nullptr);

std::vector<NormalizedRow> normalize_rows(const MlpModel& model, std::span<const GainSample> samples);

nlohmann::json to_json(const MlpModel& model);
MlpModel mlp_from_json(const nlohmann::json& j);

}  // namespace llc
