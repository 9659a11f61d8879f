// Command-line driver for the hybrid LLC gain surrogate.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "llc/errors.hpp"
#include "llc/io.hpp"
#include "llc/log.hpp"
#include "llc/pipeline.hpp"

using namespace llc;

namespace {

struct Common {
    std::string config_file;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::string preset;
    bool quiet = false;
    bool verbose = false;
};

void add_common(CLI::App* cmd, Common& c, bool with_preset) {
    cmd->add_option("--config", c.config_file, "key=value config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", c.overrides, "override one config key, e.g. --set gmdh.max_layers=4");
    cmd->add_option("--seed", c.seed, "random seed");
    cmd->add_option("--threads", c.threads, "worker threads (0 = all cores)");
    if (with_preset)
        cmd->add_option("--preset", c.preset, "converter preset")->check(CLI::IsMember({"table1", "table1-validation"}));
    cmd->add_flag("--quiet", c.quiet, "suppress warnings");
    cmd->add_flag("--verbose", c.verbose, "progress messages");
}

// File values first, then --set, then dedicated flags.
RunConfig resolve(const Common& c) {
    if (c.quiet) set_log_level(LogLevel::quiet);
    if (c.verbose) set_log_level(LogLevel::info);
    RunConfig cfg;
    ConfigMap values;
    if (!c.config_file.empty()) values = read_config(c.config_file);
    for (const std::string& kv : c.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        values[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    if (!c.preset.empty()) values["sweep.train.preset"] = c.preset;
    if (c.seed) values["seed"] = std::to_string(*c.seed);
    if (c.threads) values["threads"] = std::to_string(*c.threads);
    apply_config(values, cfg);
    cfg.hybrid.mlp.seed = cfg.hybrid.seed;
    return cfg;
}

GenerationOptions generation(const RunConfig& cfg) {
    GenerationOptions g;
    g.threads = cfg.hybrid.threads;
    return g;
}

void write_report(const ErrorReport& report, const fs::path& csv) {
    write_error_report(report, csv);
    fs::path summary = csv;
    summary.replace_extension(".summary.json");
    save_json(summary_json(report), summary);
}

GmdhModel load_gmdh(const fs::path& p) { return gmdh_from_json(load_json(p)); }

std::string one_line(std::string s) {
    for (char& ch : s)
        if (ch == '\n' || ch == '\r') ch = ' ';
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hybrid MLP/GMDH surrogate for LLC resonant converter voltage gain"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    Common common;
    std::string out, data, model;
    double ln = 0.0, q = 0.0, fn = 1.0;
    int periods = 2;
    std::string waveform_out;

    auto* gen = app.add_subcommand("gen-data", "simulate the training grid and write a dataset CSV");
    add_common(gen, common, true);
    gen->add_option("--out", out, "dataset CSV")->required();

    auto* tmlp = app.add_subcommand("train-mlp", "train the MLP on a simulator dataset");
    add_common(tmlp, common, false);
    tmlp->add_option("--data", data, "simulator dataset CSV")->required()->check(CLI::ExistingFile);
    tmlp->add_option("--out", out, "MLP model JSON")->required();
    std::string history_out;
    tmlp->add_option("--history", history_out, "loss history CSV");

    auto* synth = app.add_subcommand("synthesize", "evaluate the MLP on the dense grid");
    add_common(synth, common, false);
    synth->add_option("--model", model, "MLP model JSON")->required()->check(CLI::ExistingFile);
    synth->add_option("--out", out, "synthetic dataset CSV")->required();

    auto* tgmdh = app.add_subcommand("train-gmdh", "train the GMDH network on a dataset");
    add_common(tgmdh, common, false);
    tgmdh->add_option("--data", data, "dataset CSV")->required()->check(CLI::ExistingFile);
    tgmdh->add_option("--out", out, "GMDH model JSON")->required();

    auto* all = app.add_subcommand("run-all", "simulate, train MLP, synthesize, train GMDH, evaluate");
    add_common(all, common, true);
    all->add_option("--out", out, "output directory")->required();

    auto* eval = app.add_subcommand("evaluate", "compare a GMDH model and FHA against the simulator");
    add_common(eval, common, false);
    eval->add_option("--model", model, "GMDH model JSON")->required()->check(CLI::ExistingFile);
    eval->add_option("--out", out, "error report CSV (summary JSON written alongside)")->required();

    auto* plot = app.add_subcommand("plot-data", "gain sweep f_n,G_RT,G_hybrid,G_fha at one (L_n, Q)");
    add_common(plot, common, false);
    plot->add_option("--model", model, "GMDH model JSON")->required()->check(CLI::ExistingFile);
    plot->add_option("--ln", ln, "L_n")->required();
    plot->add_option("--q", q, "Q")->required();
    plot->add_option("--out", out, "CSV path (default stdout)");

    auto* exp = app.add_subcommand("export-model", "expand a GMDH model into an explicit polynomial");
    add_common(exp, common, false);
    exp->add_option("--model", model, "GMDH model JSON")->required()->check(CLI::ExistingFile);
    exp->add_option("--out", out, "model JSON with the expansion attached")->required();

    auto* sim = app.add_subcommand("simulate", "one simulator run, optionally dumping the waveform");
    add_common(sim, common, true);
    sim->add_option("--fn", fn, "f_n")->required();
    sim->add_option("--ln", ln, "L_n")->required();
    sim->add_option("--q", q, "Q")->required();
    sim->add_option("--waveform", waveform_out, "waveform CSV");
    sim->add_option("--periods", periods, "steady-state periods to record")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "error: usage: %s\n", one_line(e.what()).c_str());
        return 2;
    }

    try {
        RunConfig cfg = resolve(common);
        HybridConfig& h = cfg.hybrid;

        if (gen->parsed()) {
            write_dataset(generate_training_data(h.train, h.sim, generation(cfg)), out);
        } else if (tmlp->parsed()) {
            const auto samples = read_dataset(data);
            auto [tr, va] = stratified_split(samples);
            TrainResult r = train_mlp(tr, va, h.mlp);
            save_json(to_json(r.model), out);
            if (!history_out.empty()) write_history(r.history, history_out);
        } else if (synth->parsed()) {
            const MlpModel m = mlp_from_json(load_json(model));
            write_dataset(synthesize_dataset(m, h.dense.points()), out);
        } else if (tgmdh->parsed()) {
            const auto samples = read_dataset(data);
            auto [tr, va] = stratified_split(samples);
            const GmdhModel m = train_gmdh(feature_table(h.features, tr), feature_table(h.features, va), h.gmdh);
            save_json(to_json(m), out);
        } else if (all->parsed()) {
            const fs::path dir = out;
            DirectoryLock lock(dir);
            HybridResult r = run_hybrid(h);
            write_dataset(r.simulator_data, dir / "simulator.csv");
            save_json(to_json(r.mlp.model), dir / "mlp.json");
            write_history(r.mlp.history, dir / "mlp_history.csv");
            write_dataset(r.synthetic_data, dir / "synthetic.csv");
            save_json(to_json(r.gmdh), dir / "gmdh.json");
            ErrorReport report = evaluate(r.gmdh, cfg.eval, h.sim, generation(cfg));
            write_report(report, dir / "report.csv");
            // Wall-clock timings go to their own file so the manifest stays reproducible.
            save_json(r.manifest["timings"], dir / "timings.json");
            r.manifest.erase("timings");
            r.manifest["eval_sweep"] = to_json(cfg.eval);
            save_json(r.manifest, dir / "manifest.json");
        } else if (eval->parsed()) {
            write_report(evaluate(load_gmdh(model), cfg.eval, h.sim, generation(cfg)), out);
        } else if (plot->parsed()) {
            SweepSpec s = cfg.eval;
            s.pairs = {{ln, q}};
            s.ln_values.clear();
            s.q_values.clear();
            const ErrorReport report = evaluate(load_gmdh(model), s, h.sim, generation(cfg));
            std::string csv = "f_n,G_RT,G_hybrid,G_fha\n";
            char line[128];
            for (const ErrorRecord& r : report.rows) {
                std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g\n", r.point.f_n, r.g_rt, r.g_hybrid,
                              r.g_fha);
                csv += line;
            }
            if (out.empty()) {
                std::fputs(csv.c_str(), stdout);
            } else {
                std::ofstream f(out, std::ios::binary);
                if (!(f << csv)) throw ConfigError("cannot write " + out);
            }
        } else if (exp->parsed()) {
            GmdhModel m = load_gmdh(model);
            m.expanded = export_polynomial(m, h.gmdh.export_term_budget);
            save_json(to_json(m), out);
        } else if (sim->parsed()) {
            const CircuitParams c = realize(h.train.base, ln, q);
            const double f_s = fn * c.resonant_frequency();
            GainResult g;
            if (!waveform_out.empty()) {
                Waveform w = simulate_waveform(c, f_s, h.sim, periods);
                write_waveform(w, waveform_out);
                g = w.summary;
            } else {
                g = simulate_gain(c, f_s, h.sim);
            }
            std::printf("f_n=%.6g L_n=%.6g Q=%.6g f_s=%.6g G=%.9g converged=%s periods=%d\n", fn, ln, q, f_s,
                        g.gain, g.converged ? "true" : "false", g.periods_used);
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s: %s\n", e.kind().c_str(), one_line(e.what()).c_str());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: internal: %s\n", one_line(e.what()).c_str());
        return 1;
    }
    return 0;
}
