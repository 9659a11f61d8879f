#include "llc/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "llc/errors.hpp"
#include "llc/log.hpp"

namespace llc {

void MlpHyper::validate() const {
    if (hidden_layers < 1) throw ConfigError("mlp.hidden_layers must be >= 1");
    if (width < 1) throw ConfigError("mlp.width must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("mlp.learning_rate must be > 0");
    if (epochs < 1) throw ConfigError("mlp.epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("mlp.batch_size must be >= 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("mlp moment decay rates must lie in [0, 1)");
    }
}

void MlpModel::validate() const {
    if (layer_sizes.size() < 2 || layer_sizes.front() != 3 || layer_sizes.back() != 1) {
        throw ModelError("MLP layer sizes must start at 3 inputs and end at 1 output");
    }
    if (layers.size() + 1 != layer_sizes.size()) throw ModelError("MLP layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const DenseLayer& d = layers[l];
        if (d.inputs != layer_sizes[l] || d.outputs != layer_sizes[l + 1] ||
            d.weights.size() != static_cast<std::size_t>(d.inputs) * d.outputs ||
            d.biases.size() != static_cast<std::size_t>(d.outputs)) {
            throw ModelError("MLP layer " + std::to_string(l) + " shape does not match layer sizes");
        }
    }
    if (input_norm.mean.size() != 3 || input_norm.stddev.size() != 3 || output_norm.mean.size() != 1 ||
        output_norm.stddev.size() != 1) {
        throw ModelError("MLP normalization statistics have the wrong shape");
    }
    for (double s : input_norm.stddev) {
        if (!(s > 0.0)) throw ModelError("MLP input stddev must be positive");
    }
    if (!(output_norm.stddev[0] > 0.0)) throw ModelError("MLP output stddev must be positive");
}

std::size_t MlpModel::parameter_count() const {
    std::size_t n = 0;
    for (const DenseLayer& d : layers) n += d.weights.size() + d.biases.size();
    return n;
}

namespace {

std::array<double, 3> inputs_of(const OperatingPoint& p) { return {p.f_n, p.L_n, p.Q}; }

struct Moments {
    double mean = 0.0;
    double stddev = 0.0;
};

template <typename Get>
Moments moments(std::span<const GainSample> s, Get get) {
    Moments m;
    for (const GainSample& g : s) m.mean += get(g);
    m.mean /= static_cast<double>(s.size());
    double var = 0.0;
    for (const GainSample& g : s) {
        const double d = get(g) - m.mean;
        var += d * d;
    }
    m.stddev = std::sqrt(var / static_cast<double>(s.size()));
    return m;
}

// Relative to the column magnitude, anything below this spread is constant.
bool degenerate(const Moments& m) { return !(m.stddev > 1e-12 * std::max(1.0, std::abs(m.mean))); }

}  // namespace

Standardizer fit_input_standardizer(std::span<const GainSample> samples) {
    if (samples.empty()) throw ConfigError("cannot fit normalization on an empty set");
    Standardizer st;
    int constant = 0;
    static constexpr const char* kNames[3] = {"f_n", "L_n", "Q"};
    for (int j = 0; j < 3; ++j) {
        const Moments m = moments(samples, [j](const GainSample& g) { return inputs_of(g.point)[j]; });
        st.mean.push_back(m.mean);
        if (degenerate(m)) {
            ++constant;
            st.stddev.push_back(1.0);
            log_info(std::string("MLP input ") + kNames[j] + " is constant in the training set");
        } else {
            st.stddev.push_back(m.stddev);
        }
    }
    if (constant == 3) throw ConfigError("every MLP input feature is constant; nothing to learn from");
    return st;
}

Standardizer fit_output_standardizer(std::span<const GainSample> samples) {
    if (samples.empty()) throw ConfigError("cannot fit normalization on an empty set");
    const Moments m = moments(samples, [](const GainSample& g) { return g.gain; });
    return Standardizer{{m.mean}, {degenerate(m) ? 1.0 : m.stddev}};
}

MlpModel init_mlp(const MlpHyper& hyper) {
    hyper.validate();
    MlpModel model;
    model.seed = hyper.seed;
    model.layer_sizes.push_back(3);
    for (int i = 0; i < hyper.hidden_layers; ++i) model.layer_sizes.push_back(hyper.width);
    model.layer_sizes.push_back(1);
    std::mt19937_64 rng(hyper.seed);
    for (std::size_t l = 0; l + 1 < model.layer_sizes.size(); ++l) {
        DenseLayer d;
        d.inputs = model.layer_sizes[l];
        d.outputs = model.layer_sizes[l + 1];
        const double limit = std::sqrt(6.0 / (d.inputs + d.outputs));
        std::uniform_real_distribution<double> dist(-limit, limit);
        d.weights.resize(static_cast<std::size_t>(d.inputs) * d.outputs);
        // The output layer starts at zero so the initial prediction is the
        // target mean; a constant target is then fitted exactly.
        const bool output = l + 2 == model.layer_sizes.size();
        for (double& w : d.weights) w = output ? 0.0 : dist(rng);
        d.biases.assign(d.outputs, 0.0);
        model.layers.push_back(std::move(d));
    }
    model.input_norm = Standardizer{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};
    model.output_norm = Standardizer{{0.0}, {1.0}};
    return model;
}

std::vector<double> flatten_parameters(const MlpModel& model) {
    std::vector<double> p;
    p.reserve(model.parameter_count());
    for (const DenseLayer& d : model.layers) {
        p.insert(p.end(), d.weights.begin(), d.weights.end());
        p.insert(p.end(), d.biases.begin(), d.biases.end());
    }
    return p;
}

void assign_parameters(MlpModel& model, std::span<const double> params) {
    if (params.size() != model.parameter_count()) throw ModelError("parameter vector has the wrong length");
    std::size_t k = 0;
    for (DenseLayer& d : model.layers) {
        std::copy_n(params.begin() + k, d.weights.size(), d.weights.begin());
        k += d.weights.size();
        std::copy_n(params.begin() + k, d.biases.size(), d.biases.begin());
        k += d.biases.size();
    }
}

namespace {

// Forward pass keeping every layer's activations; returns the raw output.
double forward(const MlpModel& model, const double* x, std::vector<std::vector<double>>& acts) {
    acts.resize(model.layers.size() + 1);
    acts[0].assign(x, x + 3);
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const DenseLayer& d = model.layers[l];
        const std::vector<double>& in = acts[l];
        std::vector<double>& out = acts[l + 1];
        out.resize(d.outputs);
        const bool hidden = l + 1 < model.layers.size();
        for (int o = 0; o < d.outputs; ++o) {
            const double* w = d.weights.data() + static_cast<std::size_t>(o) * d.inputs;
            double z = d.biases[o];
            for (int i = 0; i < d.inputs; ++i) z += w[i] * in[i];
            out[o] = hidden ? std::tanh(z) : z;
        }
    }
    return acts.back()[0];
}

// Accumulates d(err^2)/d(params) * scale into grad for one sample.
void backward(const MlpModel& model, const std::vector<std::vector<double>>& acts, double dloss_dout,
              std::vector<double>& grad, std::vector<double>& delta, std::vector<double>& next_delta,
              const std::vector<std::size_t>& offsets) {
    delta.assign(1, dloss_dout);
    for (std::size_t l = model.layers.size(); l-- > 0;) {
        const DenseLayer& d = model.layers[l];
        const std::vector<double>& in = acts[l];
        double* gw = grad.data() + offsets[l];
        double* gb = gw + d.weights.size();
        for (int o = 0; o < d.outputs; ++o) {
            const double dz = delta[o];
            gb[o] += dz;
            double* gwo = gw + static_cast<std::size_t>(o) * d.inputs;
            for (int i = 0; i < d.inputs; ++i) gwo[i] += dz * in[i];
        }
        if (l == 0) break;
        next_delta.assign(d.inputs, 0.0);
        for (int o = 0; o < d.outputs; ++o) {
            const double* w = d.weights.data() + static_cast<std::size_t>(o) * d.inputs;
            for (int i = 0; i < d.inputs; ++i) next_delta[i] += w[i] * delta[o];
        }
        // Inputs to layer l are tanh activations of layer l-1.
        for (int i = 0; i < d.inputs; ++i) next_delta[i] *= 1.0 - in[i] * in[i];
        delta.swap(next_delta);
    }
}

std::vector<std::size_t> parameter_offsets(const MlpModel& model) {
    std::vector<std::size_t> off;
    std::size_t k = 0;
    for (const DenseLayer& d : model.layers) {
        off.push_back(k);
        k += d.weights.size() + d.biases.size();
    }
    return off;
}

double batch_loss(const MlpModel& model, std::span<const NormalizedRow> rows,
                  std::span<const std::size_t> order, std::vector<double>* gradient) {
    std::vector<std::vector<double>> acts;
    std::vector<double> delta, next_delta;
    std::vector<std::size_t> offsets;
    if (gradient) {
        gradient->assign(model.parameter_count(), 0.0);
        offsets = parameter_offsets(model);
    }
    const double inv_n = 1.0 / static_cast<double>(order.size());
    double loss = 0.0;
    for (std::size_t idx : order) {
        const NormalizedRow& r = rows[idx];
        const double err = forward(model, r.x.data(), acts) - r.y;
        loss += err * err;
        if (gradient) backward(model, acts, 2.0 * err * inv_n, *gradient, delta, next_delta, offsets);
    }
    return loss * inv_n;
}

}  // namespace

double normalized_loss(const MlpModel& model, std::span<const NormalizedRow> rows, std::vector<double>* gradient) {
    if (rows.empty()) throw ConfigError("loss over an empty set");
    std::vector<std::size_t> order(rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    return batch_loss(model, rows, order, gradient);
}

std::vector<NormalizedRow> normalize_rows(const MlpModel& model, std::span<const GainSample> samples) {
    std::vector<NormalizedRow> rows;
    rows.reserve(samples.size());
    for (const GainSample& s : samples) {
        NormalizedRow r;
        const auto x = inputs_of(s.point);
        for (std::size_t j = 0; j < 3; ++j) r.x[j] = model.input_norm.normalize(j, x[j]);
        r.y = model.output_norm.normalize(0, s.gain);
        rows.push_back(r);
    }
    return rows;
}

TrainResult train_mlp(std::span<const GainSample> train, std::span<const GainSample> val, const MlpHyper& hyper) {
    hyper.validate();
    if (train.empty()) throw ConfigError("MLP training set is empty");
    for (const GainSample& s : train) {
        if (s.source != Source::simulator) throw ConfigError("MLP training samples must come from the simulator");
    }

    TrainResult result;
    MlpModel& model = result.model;
    model = init_mlp(hyper);
    model.input_norm = fit_input_standardizer(train);
    model.output_norm = fit_output_standardizer(train);
    for (int j = 0; j < 3; ++j) {
        model.input_min[j] = std::numeric_limits<double>::infinity();
        model.input_max[j] = -std::numeric_limits<double>::infinity();
    }
    for (const GainSample& s : train) {
        const auto x = inputs_of(s.point);
        for (int j = 0; j < 3; ++j) {
            model.input_min[j] = std::min(model.input_min[j], x[j]);
            model.input_max[j] = std::max(model.input_max[j], x[j]);
        }
    }

    const std::vector<NormalizedRow> train_rows = normalize_rows(model, train);
    const std::vector<NormalizedRow> val_rows = normalize_rows(model, val);
    const bool has_val = !val_rows.empty();

    std::vector<double> params = flatten_parameters(model);
    std::vector<double> m1(params.size(), 0.0), m2(params.size(), 0.0), grad;
    std::vector<std::size_t> order(train_rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(hyper.seed ^ 0x9e3779b97f4a7c15ULL);

    std::vector<double> best_params = params;
    double best_val = std::numeric_limits<double>::infinity();
    long step = 0;
    const std::size_t batch = static_cast<std::size_t>(hyper.batch_size);

    for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t stop = std::min(order.size(), start + batch);
            batch_loss(model, train_rows, std::span(order).subspan(start, stop - start), &grad);
            ++step;
            const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
            for (std::size_t k = 0; k < params.size(); ++k) {
                m1[k] = hyper.beta1 * m1[k] + (1.0 - hyper.beta1) * grad[k];
                m2[k] = hyper.beta2 * m2[k] + (1.0 - hyper.beta2) * grad[k] * grad[k];
                params[k] -= hyper.learning_rate * (m1[k] / c1) / (std::sqrt(m2[k] / c2) + hyper.epsilon);
            }
            assign_parameters(model, params);
        }
        const double train_mse = normalized_loss(model, train_rows);
        const double val_mse = has_val ? normalized_loss(model, val_rows) : train_mse;
        if (!std::isfinite(train_mse) || !std::isfinite(val_mse)) {
            throw FitError("MLP loss became non-finite at epoch " + std::to_string(epoch));
        }
        result.history.push_back({epoch, train_mse, val_mse});
        if (val_mse < best_val) {
            best_val = val_mse;
            best_params = params;
            result.best_epoch = epoch;
        }
    }
    assign_parameters(model, best_params);
    model.training = {{"epochs", hyper.epochs},
                      {"batch_size", hyper.batch_size},
                      {"learning_rate", hyper.learning_rate},
                      {"beta1", hyper.beta1},
                      {"beta2", hyper.beta2},
                      {"best_epoch", result.best_epoch},
                      {"best_val_mse", best_val},
                      {"train_rows", train.size()},
                      {"val_rows", val.size()}};
    return result;
}

double predict_mlp(const MlpModel& model, double f_n, double L_n, double Q) {
    if (model.layers.empty() || model.input_norm.mean.size() != 3 || model.input_norm.stddev.size() != 3 ||
        model.output_norm.mean.size() != 1 || model.output_norm.stddev.size() != 1) {
        throw ModelError("MLP model is incomplete");
    }
    const std::array<double, 3> raw{f_n, L_n, Q};
    std::array<double, 3> x{};
    for (std::size_t j = 0; j < 3; ++j) x[j] = model.input_norm.normalize(j, raw[j]);
    std::vector<double> in(x.begin(), x.end()), out;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const DenseLayer& d = model.layers[l];
        if (static_cast<std::size_t>(d.inputs) != in.size() ||
            d.weights.size() != static_cast<std::size_t>(d.inputs) * d.outputs ||
            d.biases.size() != static_cast<std::size_t>(d.outputs)) {
            throw ModelError("MLP layer " + std::to_string(l) + " has inconsistent shape");
        }
        out.assign(d.outputs, 0.0);
        const bool hidden = l + 1 < model.layers.size();
        for (int o = 0; o < d.outputs; ++o) {
            const double* w = d.weights.data() + static_cast<std::size_t>(o) * d.inputs;
            double z = d.biases[o];
            for (int i = 0; i < d.inputs; ++i) z += w[i] * in[i];
            out[o] = hidden ? std::tanh(z) : z;
        }
        in.swap(out);
    }
    if (in.size() != 1) throw ModelError("MLP output layer must have width 1");
    return model.output_norm.denormalize(0, in[0]);
}

double predict_mlp(const MlpModel& model, const OperatingPoint& point) {
    return predict_mlp(model, point.f_n, point.L_n, point.Q);
}

std::vector<GainSample> synthesize_dataset(const MlpModel& model, std::span<const OperatingPoint> grid) {
    if (grid.empty()) throw ConfigError("synthesis grid is empty");
    model.validate();
    std::size_t outside = 0;
    std::vector<GainSample> out;
    out.reserve(grid.size());
    for (const OperatingPoint& p : grid) {
        const auto x = inputs_of(p);
        for (int j = 0; j < 3; ++j) {
            // Small slack for grid endpoints that round past the training range.
            const double slack = 1e-9 * std::max(1.0, std::abs(model.input_max[j]));
            if (x[j] < model.input_min[j] - slack || x[j] > model.input_max[j] + slack) {
                ++outside;
                break;
            }
        }
        GainSample s;
        s.point = p;
        s.alpha = alpha_feature(p).alpha;
        s.gain = predict_mlp(model, p);
        s.source = Source::mlp;
        out.push_back(s);
    }
    if (outside > 0) {
        log_warning(std::to_string(outside) + " of " + std::to_string(grid.size()) +
                    " synthesis points lie outside the MLP training range");
    }
    return out;
}

nlohmann::json to_json(const MlpModel& model) {
    nlohmann::json j;
    j["kind"] = "mlp";
    j["layer_sizes"] = model.layer_sizes;
    j["activation"] = {{"hidden", "tanh"}, {"output", "identity"}};
    nlohmann::json layers = nlohmann::json::array();
    for (const DenseLayer& d : model.layers) {
        layers.push_back({{"inputs", d.inputs}, {"outputs", d.outputs}, {"weights", d.weights}, {"biases", d.biases}});
    }
    j["layers"] = std::move(layers);
    j["input_norm"] = {{"mean", model.input_norm.mean}, {"stddev", model.input_norm.stddev}};
    j["output_norm"] = {{"mean", model.output_norm.mean}, {"stddev", model.output_norm.stddev}};
    j["input_range"] = {{"min", model.input_min}, {"max", model.input_max}};
    j["seed"] = model.seed;
    j["training"] = model.training;
    return j;
}

MlpModel mlp_from_json(const nlohmann::json& j) {
    MlpModel model;
    try {
        if (j.at("kind").get<std::string>() != "mlp") throw FormatError("not an MLP model document");
        model.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
        for (const auto& jl : j.at("layers")) {
            DenseLayer d;
            d.inputs = jl.at("inputs").get<int>();
            d.outputs = jl.at("outputs").get<int>();
            d.weights = jl.at("weights").get<std::vector<double>>();
            d.biases = jl.at("biases").get<std::vector<double>>();
            model.layers.push_back(std::move(d));
        }
        model.input_norm.mean = j.at("input_norm").at("mean").get<std::vector<double>>();
        model.input_norm.stddev = j.at("input_norm").at("stddev").get<std::vector<double>>();
        model.output_norm.mean = j.at("output_norm").at("mean").get<std::vector<double>>();
        model.output_norm.stddev = j.at("output_norm").at("stddev").get<std::vector<double>>();
        model.input_min = j.at("input_range").at("min").get<std::array<double, 3>>();
        model.input_max = j.at("input_range").at("max").get<std::array<double, 3>>();
        model.seed = j.at("seed").get<std::uint64_t>();
        model.training = j.value("training", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed MLP model JSON: ") + e.what());
    }
    model.validate();
    return model;
}

}  // namespace llc
