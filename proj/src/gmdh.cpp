#include "llc/gmdh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>

#include "llc/errors.hpp"

namespace llc {

void GmdhConfig::validate() const {
    if (max_layers < 1) throw ConfigError("gmdh.max_layers must be >= 1");
    if (neurons_kept < 1) throw ConfigError("gmdh.neurons_kept must be >= 1");
    if (!(ridge >= 0.0)) throw ConfigError("gmdh.ridge must be >= 0");
    if (!(min_improvement >= 0.0)) throw ConfigError("gmdh.min_improvement must be >= 0");
    if (export_term_budget < 1) throw ConfigError("gmdh.export_term_budget must be >= 1");
}

void FeatureTable::validate() const {
    if (names.size() != columns.size()) {
        throw ConfigError("feature table has " + std::to_string(names.size()) + " names but " +
                          std::to_string(columns.size()) + " columns");
    }
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (columns[j].size() != target.size()) {
            throw ConfigError("feature column '" + names[j] + "' length does not match target");
        }
    }
}

void GmdhModel::validate() const {
    if (layers.empty()) throw ModelError("GMDH model has no layers");
    std::size_t width = feature_names.size();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].empty()) throw ModelError("GMDH layer " + std::to_string(l) + " is empty");
        for (const GmdhNeuron& n : layers[l]) {
            if (n.input_a < 0 || n.input_b < 0 || n.input_a >= n.input_b ||
                static_cast<std::size_t>(n.input_b) >= width) {
                throw ModelError("GMDH layer " + std::to_string(l) + " has invalid input wiring (" +
                                 std::to_string(n.input_a) + ", " + std::to_string(n.input_b) + ")");
            }
            for (double b : n.beta) {
                if (!std::isfinite(b)) throw ModelError("GMDH neuron has a non-finite coefficient");
            }
        }
        width = layers[l].size();
    }
    if (output_neuron < 0 || static_cast<std::size_t>(output_neuron) >= layers.back().size()) {
        throw ModelError("GMDH output neuron index out of range");
    }
}

std::array<double, 6> fit_neuron(std::span<const double> x1, std::span<const double> x2,
                                 std::span<const double> y, double ridge) {
    constexpr int P = 6;
    if (x1.size() != x2.size() || x1.size() != y.size()) {
        throw FitError("fit_neuron inputs differ in length");
    }
    if (x1.size() < P) {
        throw FitError("fit_neuron needs at least 6 samples, got " + std::to_string(x1.size()));
    }
    if (!(ridge >= 0.0)) throw ConfigError("ridge must be >= 0");

    std::array<std::array<double, P>, P> gram{};
    std::array<double, P> rhs{};
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double a = x1[i], b = x2[i];
        const std::array<double, P> phi{1.0, a, a * a, a * b, b * b, b};
        for (int r = 0; r < P; ++r) {
            rhs[r] += phi[r] * y[i];
            for (int c = 0; c <= r; ++c) gram[r][c] += phi[r] * phi[c];
        }
    }
    for (int r = 1; r < P; ++r) gram[r][r] += ridge;

    // Jacobi scaling to unit diagonal before the Cholesky factorization.
    std::array<double, P> scale{};
    for (int r = 0; r < P; ++r) {
        if (!(gram[r][r] > 0.0)) {
            throw FitError(ridge == 0.0 ? "rank-deficient neuron system (a basis column is zero); use ridge > 0"
                                        : "rank-deficient neuron system");
        }
        scale[r] = std::sqrt(gram[r][r]);
    }
    for (int r = 0; r < P; ++r) {
        rhs[r] /= scale[r];
        for (int c = 0; c <= r; ++c) gram[r][c] /= scale[r] * scale[c];
    }

    std::array<std::array<double, P>, P> chol{};
    for (int j = 0; j < P; ++j) {
        double d = gram[j][j];
        for (int k = 0; k < j; ++k) d -= chol[j][k] * chol[j][k];
        if (!(d > 1e-15)) {
            throw FitError(ridge == 0.0 ? "rank-deficient neuron system; use ridge > 0"
                                        : "rank-deficient neuron system even with ridge");
        }
        chol[j][j] = std::sqrt(d);
        for (int i = j + 1; i < P; ++i) {
            double s = gram[i][j];
            for (int k = 0; k < j; ++k) s -= chol[i][k] * chol[j][k];
            chol[i][j] = s / chol[j][j];
        }
    }
    std::array<double, P> z{};
    for (int i = 0; i < P; ++i) {
        double s = rhs[i];
        for (int k = 0; k < i; ++k) s -= chol[i][k] * z[k];
        z[i] = s / chol[i][i];
    }
    std::array<double, P> beta{};
    for (int i = P - 1; i >= 0; --i) {
        double s = z[i];
        for (int k = i + 1; k < P; ++k) s -= chol[k][i] * beta[k];
        beta[i] = s / chol[i][i];
    }
    for (int i = 0; i < P; ++i) beta[i] /= scale[i];
    return beta;
}

namespace {

double mse(const GmdhNeuron& n, const std::vector<double>& a, const std::vector<double>& b,
           const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double e = n.eval(a[i], b[i]) - y[i];
        s += e * e;
    }
    return s / static_cast<double>(y.size());
}

std::vector<double> neuron_output(const GmdhNeuron& n, const std::vector<std::vector<double>>& inputs) {
    const auto& a = inputs[n.input_a];
    const auto& b = inputs[n.input_b];
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = n.eval(a[i], b[i]);
    return out;
}

}  // namespace

GmdhModel train_gmdh(const FeatureTable& train, const FeatureTable& val, const GmdhConfig& config) {
    config.validate();
    train.validate();
    val.validate();
    const std::size_t m = train.columns.size();
    if (m < 2) throw ConfigError("GMDH needs at least 2 features, got " + std::to_string(m));
    if (val.columns.size() != m) throw ConfigError("train and validation feature counts differ");
    if (train.names != val.names) throw ConfigError("train and validation feature names differ");
    if (val.rows() == 0) throw ConfigError("GMDH validation set is empty");

    GmdhModel model;
    model.feature_names = train.names;

    std::vector<std::vector<double>> train_in = train.columns;
    std::vector<std::vector<double>> val_in = val.columns;
    double best_so_far = std::numeric_limits<double>::infinity();

    for (int layer = 0; layer < config.max_layers; ++layer) {
        const int width = static_cast<int>(train_in.size());
        std::vector<GmdhNeuron> candidates;
        for (int a = 0; a < width; ++a) {
            for (int b = a + 1; b < width; ++b) {
                GmdhNeuron n;
                n.input_a = a;
                n.input_b = b;
                try {
                    n.beta = fit_neuron(train_in[a], train_in[b], train.target, config.ridge);
                } catch (const FitError&) {
                    continue;
                }
                n.external_criterion = mse(n, val_in[a], val_in[b], val.target);
                if (!std::isfinite(n.external_criterion)) continue;
                candidates.push_back(n);
            }
        }
        if (candidates.empty()) {
            if (layer == 0) throw FitError("every GMDH candidate neuron was rank-deficient");
            break;
        }
        // Candidates were generated in lexicographic pair order, so a stable
        // sort breaks criterion ties by that order.
        std::stable_sort(candidates.begin(), candidates.end(),
                         [](const GmdhNeuron& x, const GmdhNeuron& y) {
                             return x.external_criterion < y.external_criterion;
                         });
        const double best = candidates.front().external_criterion;
        if (layer > 0 && !(best < best_so_far - config.min_improvement)) break;
        best_so_far = best;

        if (candidates.size() > static_cast<std::size_t>(config.neurons_kept)) {
            candidates.resize(config.neurons_kept);
        }
        std::vector<std::vector<double>> next_train, next_val;
        for (const GmdhNeuron& n : candidates) {
            next_train.push_back(neuron_output(n, train_in));
            next_val.push_back(neuron_output(n, val_in));
        }
        model.layers.push_back(std::move(candidates));
        train_in = std::move(next_train);
        val_in = std::move(next_val);
        // A single surviving neuron cannot feed a two-input layer.
        if (train_in.size() < 2) break;
    }
    model.output_neuron = 0;
    return model;
}

double predict_gmdh(const GmdhModel& model, std::span<const double> features) {
    if (features.size() != model.feature_count()) {
        throw ModelError("GMDH model expects " + std::to_string(model.feature_count()) +
                         " features, got " + std::to_string(features.size()));
    }
    if (model.layers.empty()) throw ModelError("GMDH model has no layers");
    std::vector<double> in(features.begin(), features.end());
    std::vector<double> out;
    for (const auto& layer : model.layers) {
        out.clear();
        for (const GmdhNeuron& n : layer) {
            if (n.input_a < 0 || n.input_b < 0 || static_cast<std::size_t>(n.input_a) >= in.size() ||
                static_cast<std::size_t>(n.input_b) >= in.size()) {
                throw ModelError("GMDH neuron input index out of range");
            }
            out.push_back(n.eval(in[n.input_a], in[n.input_b]));
        }
        in.swap(out);
    }
    if (model.output_neuron < 0 || static_cast<std::size_t>(model.output_neuron) >= in.size()) {
        throw ModelError("GMDH output neuron index out of range");
    }
    return in[model.output_neuron];
}

// Polynomial arithmetic on packed exponent keys (8 bits per variable).
namespace {

using Key = std::uint64_t;
using SparsePoly = std::unordered_map<Key, double>;

constexpr int kBitsPerVar = 8;
constexpr int kMaxVars = 64 / kBitsPerVar;

Key unit_key(int var) { return Key{1} << (kBitsPerVar * var); }

SparsePoly multiply(const SparsePoly& p, const SparsePoly& q, std::size_t budget) {
    SparsePoly out;
    out.reserve(std::min(budget, p.size() * q.size()));
    for (const auto& [kp, cp] : p) {
        for (const auto& [kq, cq] : q) {
            out[kp + kq] += cp * cq;
            if (out.size() > budget) {
                throw ExportTooLarge("polynomial expansion exceeds " + std::to_string(budget) +
                                     " monomials; train with fewer layers");
            }
        }
    }
    return out;
}

void add_scaled(SparsePoly& acc, const SparsePoly& p, double c, std::size_t budget) {
    if (c == 0.0) return;
    for (const auto& [k, v] : p) acc[k] += c * v;
    if (acc.size() > budget) {
        throw ExportTooLarge("polynomial expansion exceeds " + std::to_string(budget) +
                             " monomials; train with fewer layers");
    }
}

}  // namespace

VkgPolynomial export_polynomial(const GmdhModel& model, std::size_t term_budget) {
    model.validate();
    const std::size_t m = model.feature_count();
    if (m > static_cast<std::size_t>(kMaxVars)) {
        throw ExportTooLarge("polynomial export supports at most 8 features");
    }
    if (model.layers.size() > 7) {
        throw ExportTooLarge("polynomial export supports at most 7 layers (degree 128)");
    }

    // Expand only the neurons the output depends on, one layer at a time.
    std::vector<std::vector<bool>> needed(model.layers.size());
    for (std::size_t l = 0; l < model.layers.size(); ++l) needed[l].assign(model.layers[l].size(), false);
    needed.back()[model.output_neuron] = true;
    for (std::size_t l = model.layers.size() - 1; l > 0; --l) {
        for (std::size_t i = 0; i < model.layers[l].size(); ++i) {
            if (!needed[l][i]) continue;
            needed[l - 1][model.layers[l][i].input_a] = true;
            needed[l - 1][model.layers[l][i].input_b] = true;
        }
    }

    std::vector<SparsePoly> inputs(m);
    for (std::size_t j = 0; j < m; ++j) inputs[j] = SparsePoly{{unit_key(static_cast<int>(j)), 1.0}};
    const SparsePoly one{{Key{0}, 1.0}};

    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        std::vector<SparsePoly> outputs(model.layers[l].size());
        for (std::size_t i = 0; i < model.layers[l].size(); ++i) {
            if (!needed[l][i]) continue;
            const GmdhNeuron& n = model.layers[l][i];
            const SparsePoly& a = inputs[n.input_a];
            const SparsePoly& b = inputs[n.input_b];
            SparsePoly y;
            add_scaled(y, one, n.beta[0], term_budget);
            add_scaled(y, a, n.beta[1], term_budget);
            if (n.beta[2] != 0.0) add_scaled(y, multiply(a, a, term_budget), n.beta[2], term_budget);
            if (n.beta[3] != 0.0) add_scaled(y, multiply(a, b, term_budget), n.beta[3], term_budget);
            if (n.beta[4] != 0.0) add_scaled(y, multiply(b, b, term_budget), n.beta[4], term_budget);
            add_scaled(y, b, n.beta[5], term_budget);
            outputs[i] = std::move(y);
        }
        inputs = std::move(outputs);
    }

    VkgPolynomial poly;
    for (const auto& [k, c] : inputs[model.output_neuron]) {
        if (c == 0.0) continue;
        std::vector<int> exps(m);
        for (std::size_t j = 0; j < m; ++j) {
            exps[j] = static_cast<int>((k >> (kBitsPerVar * j)) & ((Key{1} << kBitsPerVar) - 1));
        }
        poly.emplace(std::move(exps), c);
    }
    return poly;
}

double evaluate_polynomial(const VkgPolynomial& poly, std::span<const double> x) {
    double sum = 0.0;
    for (const auto& [exps, c] : poly) {
        if (exps.size() != x.size()) throw ModelError("polynomial arity does not match input");
        double term = c;
        for (std::size_t j = 0; j < exps.size(); ++j) {
            for (int e = 0; e < exps[j]; ++e) term *= x[j];
        }
        sum += term;
    }
    return sum;
}

int total_degree(const VkgPolynomial& poly) {
    int d = 0;
    for (const auto& [exps, c] : poly) {
        d = std::max(d, std::accumulate(exps.begin(), exps.end(), 0));
    }
    return d;
}

nlohmann::json to_json(const GmdhModel& model) {
    nlohmann::json j;
    j["kind"] = "gmdh";
    j["feature_names"] = model.feature_names;
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : model.layers) {
        nlohmann::json jl = nlohmann::json::array();
        for (const GmdhNeuron& n : layer) {
            jl.push_back({{"inputs", {n.input_a, n.input_b}},
                          {"beta", n.beta},
                          {"external_criterion", n.external_criterion}});
        }
        layers.push_back(std::move(jl));
    }
    j["layers"] = std::move(layers);
    j["output_neuron"] = model.output_neuron;
    if (model.expanded) {
        nlohmann::json terms = nlohmann::json::array();
        for (const auto& [exps, c] : *model.expanded) {
            terms.push_back({{"exponents", exps}, {"coefficient", c}});
        }
        j["expanded"] = std::move(terms);
    }
    return j;
}

GmdhModel gmdh_from_json(const nlohmann::json& j) {
    GmdhModel model;
    try {
        if (j.at("kind").get<std::string>() != "gmdh") throw FormatError("not a GMDH model document");
        model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        for (const auto& jl : j.at("layers")) {
            std::vector<GmdhNeuron> layer;
            for (const auto& jn : jl) {
                GmdhNeuron n;
                const auto inputs = jn.at("inputs").get<std::vector<int>>();
                if (inputs.size() != 2) throw FormatError("GMDH neuron must have exactly 2 inputs");
                n.input_a = inputs[0];
                n.input_b = inputs[1];
                n.beta = jn.at("beta").get<std::array<double, 6>>();
                n.external_criterion = jn.at("external_criterion").get<double>();
                layer.push_back(n);
            }
            model.layers.push_back(std::move(layer));
        }
        model.output_neuron = j.at("output_neuron").get<int>();
        if (j.contains("expanded")) {
            VkgPolynomial poly;
            for (const auto& t : j.at("expanded")) {
                poly.emplace(t.at("exponents").get<std::vector<int>>(), t.at("coefficient").get<double>());
            }
            model.expanded = std::move(poly);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed GMDH model JSON: ") + e.what());
    }
    model.validate();
    return model;
}

}  // namespace llc
