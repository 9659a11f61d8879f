#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace llc {

/// Two-input quadratic neuron
///   y = b0 + b1*x1 + b2*x1^2 + b3*x1*x2 + b4*x2^2 + b5*x2
/// with x1 taken from input_a and x2 from input_b.
struct GmdhNeuron {
    int input_a = 0;
    int input_b = 1;
    std::array<double, 6> beta{};
    double external_criterion = 0.0;  // validation MSE

    double eval(double x1, double x2) const {
        return beta[0] + beta[1] * x1 + beta[2] * x1 * x1 + beta[3] * x1 * x2 +
               beta[4] * x2 * x2 + beta[5] * x2;
    }
};

/// Explicit multivariate polynomial: exponent multi-index -> coefficient.
using VkgPolynomial = std::map<std::vector<int>, double>;

double evaluate_polynomial(const VkgPolynomial& poly, std::span<const double> x);
int total_degree(const VkgPolynomial& poly);

struct GmdhModel {
    std::vector<std::string> feature_names;
    std::vector<std::vector<GmdhNeuron>> layers;
    int output_neuron = 0;
    std::optional<VkgPolynomial> expanded;

    std::size_t feature_count() const { return feature_names.size(); }
    /// Throws ModelError when input indices do not match the layer widths.
    void validate() const;
};

struct GmdhConfig {
    int max_layers = 8;
    int neurons_kept = 16;
    double ridge = 1e-9;
    double min_improvement = 1e-9;
    std::size_t export_term_budget = 10000;

    void validate() const;
};

/// Feature-major table: columns[j][i] is feature j of row i.
struct FeatureTable {
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;
    std::vector<double> target;

    std::size_t rows() const { return target.size(); }
    void validate() const;
};

/// Least-squares fit of the six neuron coefficients via ridge-regularized
/// normal equations (the intercept is not penalized).
std::array<double, 6> fit_neuron(std::span<const double> x1, std::span<const double> x2,
                                 std::span<const double> y, double ridge);

/// Multilayer iterative GMDH with validation MSE as the external criterion.
GmdhModel train_gmdh(const FeatureTable& train, const FeatureTable& val, const GmdhConfig& config = {});

double predict_gmdh(const GmdhModel& model, std::span<const double> features);

/// Expands the output neuron's composition into a polynomial in the raw
/// features. Throws ExportTooLarge when any intermediate expansion exceeds
/// `term_budget` monomials.
VkgPolynomial export_polynomial(const GmdhModel& model, std::size_t term_budget = 10000);

nlohmann::json to_json(const GmdhModel& model);
GmdhModel gmdh_from_json(const nlohmann::json& j);

}  // namespace llc
