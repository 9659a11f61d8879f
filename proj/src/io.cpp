#include "llc/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include "llc/errors.hpp"
#include "llc/log.hpp"

namespace llc {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    return out;
}

void finish(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out) throw ConfigError("write failed for " + path.string());
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t p = line.find(sep, start);
        out.push_back(line.substr(start, p - start));
        if (p == std::string::npos) return out;
        start = p + 1;
    }
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Rows of a CSV whose header must contain exactly `columns` (in any order);
// cells come back reordered to match `columns`.
struct CsvTable {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
    bool empty_file = false;
};

CsvTable read_csv(const fs::path& path, const std::vector<std::string>& columns) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    CsvTable table;
    std::string line;
    if (!std::getline(in, line) || trim(line).empty()) {
        table.empty_file = true;
        return table;
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> header = split(line, ',');

    std::vector<std::size_t> position(columns.size(), header.size());
    std::string missing;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        for (std::size_t h = 0; h < header.size(); ++h)
            if (trim(header[h]) == columns[c]) position[c] = h;
        if (position[c] == header.size()) missing += (missing.empty() ? "" : ",") + columns[c];
    }
    if (!missing.empty())
        throw FormatError(path.string() + ": header is missing columns " + missing);
    if (header.size() != columns.size())
        throw FormatError(path.string() + ": header has " + std::to_string(header.size()) +
                          " columns, expected " + std::to_string(columns.size()));

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells = split(line, ',');
        if (cells.size() != header.size())
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()));
        std::vector<std::string> ordered(columns.size());
        for (std::size_t c = 0; c < columns.size(); ++c) ordered[c] = trim(cells[position[c]]);
        table.rows.push_back(std::move(ordered));
        table.line_numbers.push_back(line_no);
    }
    return table;
}

double to_double(const std::string& cell, const fs::path& path, std::size_t line_no, const std::string& column) {
    double v = 0.0;
    const char* end = cell.data() + cell.size();
    auto [p, ec] = std::from_chars(cell.data(), end, v);
    if (ec != std::errc() || p != end || cell.empty())
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad value '" + cell +
                         "' in column " + column);
    return v;
}

const std::vector<std::string> kDatasetColumns{"f_n", "L_n", "Q", "alpha", "gain", "source"};
const std::vector<std::string> kReportColumns{"f_n", "L_n", "Q", "G_RT", "G_hybrid", "G_fha", "err_hybrid", "err_fha"};
const std::vector<std::string> kHistoryColumns{"epoch", "train_mse", "val_mse"};
const std::vector<std::string> kWaveformColumns{"t_s", "i_Lr_A", "v_Cr_V", "i_Lm_A", "v_Co_V"};

std::string header_line(const std::vector<std::string>& cols) {
    std::string s;
    for (std::size_t i = 0; i < cols.size(); ++i) s += (i ? "," : "") + cols[i];
    return s + "\n";
}

}  // namespace

void write_dataset(const std::vector<GainSample>& samples, const fs::path& path) {
    std::ofstream out = open_out(path);
    out << header_line(kDatasetColumns);
    for (const GainSample& s : samples) {
        out << fmt(s.point.f_n) << ',' << fmt(s.point.L_n) << ',' << fmt(s.point.Q) << ','
            << fmt(s.alpha) << ',' << fmt(s.gain) << ',' << to_string(s.source) << '\n';
    }
    finish(out, path);
}

std::vector<GainSample> read_dataset(const fs::path& path) {
    const CsvTable t = read_csv(path, kDatasetColumns);
    if (t.empty_file) {
        log_warning("dataset " + path.string() + " is empty");
        return {};
    }
    std::vector<GainSample> out;
    out.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        const std::size_t ln = t.line_numbers[i];
        GainSample s;
        s.point = make_point(to_double(r[0], path, ln, "f_n"), to_double(r[1], path, ln, "L_n"),
                             to_double(r[2], path, ln, "Q"));
        s.alpha = to_double(r[3], path, ln, "alpha");
        s.gain = to_double(r[4], path, ln, "gain");
        try {
            s.source = source_from_string(r[5]);
        } catch (const Error&) {
            throw ParseError(path.string() + ":" + std::to_string(ln) + ": unknown source '" + r[5] + "'");
        }
        out.push_back(s);
    }
    return out;
}

void write_error_report(const ErrorReport& report, const fs::path& csv_path) {
    std::ofstream out = open_out(csv_path);
    out << header_line(kReportColumns);
    for (const ErrorRecord& r : report.rows) {
        out << fmt(r.point.f_n) << ',' << fmt(r.point.L_n) << ',' << fmt(r.point.Q) << ',' << fmt(r.g_rt)
            << ',' << fmt(r.g_hybrid) << ',' << fmt(r.g_fha) << ',' << fmt(r.err_hybrid) << ','
            << fmt(r.err_fha) << '\n';
    }
    finish(out, csv_path);
}

ErrorReport read_error_report(const fs::path& csv_path) {
    const CsvTable t = read_csv(csv_path, kReportColumns);
    ErrorReport report;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& c = t.rows[i];
        const std::size_t ln = t.line_numbers[i];
        double v[8];
        for (int k = 0; k < 8; ++k) v[k] = to_double(c[k], csv_path, ln, kReportColumns[k]);
        ErrorRecord r;
        r.point = make_point(v[0], v[1], v[2]);
        r.g_rt = v[3];
        r.g_hybrid = v[4];
        r.g_fha = v[5];
        r.err_hybrid = v[6];
        r.err_fha = v[7];
        report.rows.push_back(r);
    }
    report.summarize();
    return report;
}

nlohmann::json summary_json(const ErrorReport& report) {
    nlohmann::json settings = nlohmann::json::array();
    std::vector<std::pair<double, double>> seen;
    for (const ErrorRecord& r : report.rows) {
        const std::pair<double, double> key{r.point.L_n, r.point.Q};
        if (std::find(seen.begin(), seen.end(), key) == seen.end()) seen.push_back(key);
    }
    for (const auto& [ln, q] : seen) {
        ErrorReport sub;
        for (const ErrorRecord& r : report.rows)
            if (r.point.L_n == ln && r.point.Q == q) sub.rows.push_back(r);
        sub.summarize();
        settings.push_back({{"L_n", ln},
                            {"Q", q},
                            {"points", sub.rows.size()},
                            {"hybrid", to_json(sub.hybrid)},
                            {"fha", to_json(sub.fha)}});
    }
    return {{"points", report.rows.size()},
            {"hybrid", to_json(report.hybrid)},
            {"fha", to_json(report.fha)},
            {"settings", settings}};
}

void write_history(const std::vector<EpochLoss>& history, const fs::path& path) {
    std::ofstream out = open_out(path);
    out << header_line(kHistoryColumns);
    for (const EpochLoss& e : history) out << e.epoch << ',' << fmt(e.train_mse) << ',' << fmt(e.val_mse) << '\n';
    finish(out, path);
}

std::vector<EpochLoss> read_history(const fs::path& path) {
    const CsvTable t = read_csv(path, kHistoryColumns);
    std::vector<EpochLoss> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const std::size_t ln = t.line_numbers[i];
        EpochLoss e;
        const double epoch = to_double(t.rows[i][0], path, ln, "epoch");
        e.epoch = static_cast<int>(epoch);
        if (e.epoch != epoch) throw ParseError(path.string() + ":" + std::to_string(ln) + ": epoch is not an integer");
        e.train_mse = to_double(t.rows[i][1], path, ln, "train_mse");
        e.val_mse = to_double(t.rows[i][2], path, ln, "val_mse");
        out.push_back(e);
    }
    return out;
}

void write_waveform(const Waveform& waveform, const fs::path& path) {
    std::ofstream out = open_out(path);
    out << header_line(kWaveformColumns);
    for (const WaveformSample& s : waveform.samples) {
        out << fmt(s.t) << ',' << fmt(s.state.i_Lr) << ',' << fmt(s.state.v_Cr) << ',' << fmt(s.state.i_Lm)
            << ',' << fmt(s.state.v_Co) << '\n';
    }
    finish(out, path);
}

std::vector<WaveformSample> read_waveform(const fs::path& path) {
    const CsvTable t = read_csv(path, kWaveformColumns);
    std::vector<WaveformSample> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const std::size_t ln = t.line_numbers[i];
        double v[5];
        for (int k = 0; k < 5; ++k) v[k] = to_double(t.rows[i][k], path, ln, kWaveformColumns[k]);
        out.push_back({v[0], {v[1], v[2], v[3], v[4]}});
    }
    return out;
}

void save_json(const nlohmann::json& j, const fs::path& path) {
    std::ofstream out = open_out(path);
    out << j.dump(2) << '\n';
    finish(out, path);
}

nlohmann::json load_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

ConfigMap read_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    ConfigMap values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ParseError(path.string() + ":" + std::to_string(line_no) + ": empty key");
        values[key] = trim(line.substr(eq + 1));
    }
    return values;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    for (const std::string& part : split(text, ',')) {
        const std::string cell = trim(part);
        double v = 0.0;
        auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (cell.empty() || ec != std::errc() || p != cell.data() + cell.size())
            throw ConfigError("bad number '" + cell + "' in list '" + text + "'");
        out.push_back(v);
    }
    return out;
}

namespace {

double as_double(const std::string& key, const std::string& v) {
    const auto list = parse_double_list(v);
    if (list.size() != 1) throw ConfigError(key + " expects one number, got '" + v + "'");
    return list[0];
}

long long as_int(const std::string& key, const std::string& v) {
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || p != v.data() + v.size())
        throw ConfigError(key + " expects an integer, got '" + v + "'");
    return out;
}

bool as_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + " expects a boolean, got '" + v + "'");
}

// Pairs are written "2:0.1,4:0.4".
std::vector<std::pair<double, double>> as_pairs(const std::string& key, const std::string& v) {
    std::vector<std::pair<double, double>> out;
    for (const std::string& item : split(v, ',')) {
        const auto parts = split(trim(item), ':');
        if (parts.size() != 2) throw ConfigError(key + " expects L_n:Q pairs, got '" + item + "'");
        out.emplace_back(as_double(key, parts[0]), as_double(key, parts[1]));
    }
    return out;
}

bool apply_sweep(const std::string& field, const std::string& key, const std::string& v, SweepSpec& s) {
    if (field == "fn_lo") s.fn_lo = as_double(key, v);
    else if (field == "fn_hi") s.fn_hi = as_double(key, v);
    else if (field == "fn_count") s.fn_count = static_cast<int>(as_int(key, v));
    else if (field == "ln_values") { s.ln_values = parse_double_list(v); s.pairs.clear(); }
    else if (field == "q_values") { s.q_values = parse_double_list(v); s.pairs.clear(); }
    else if (field == "pairs") { s.pairs = as_pairs(key, v); s.ln_values.clear(); s.q_values.clear(); }
    else if (field == "preset") {
        const SweepSpec p = preset_sweep(v);
        s.base = p.base;
        s.preset = p.preset;
    } else return false;
    return true;
}

}  // namespace

void apply_config(const ConfigMap& values, RunConfig& config) {
    HybridConfig& h = config.hybrid;
    for (const auto& [key, v] : values) {
        const auto dot = key.find('.');
        const std::string ns = key.substr(0, dot);
        const std::string field = dot == std::string::npos ? "" : key.substr(dot + 1);
        bool known = true;
        if (key == "seed") h.seed = static_cast<std::uint64_t>(as_int(key, v));
        else if (key == "threads") h.threads = static_cast<unsigned>(as_int(key, v));
        else if (ns == "sim") {
            if (field == "steps_per_period") h.sim.steps_per_period = static_cast<int>(as_int(key, v));
            else if (field == "max_periods") h.sim.max_periods = static_cast<int>(as_int(key, v));
            else if (field == "convergence_tol") h.sim.convergence_tol = as_double(key, v);
            else if (field == "rectifier_mode_hysteresis") h.sim.rectifier_mode_hysteresis = as_double(key, v);
            else if (field == "shooting") h.sim.shooting = as_bool(key, v);
            else known = false;
        } else if (ns == "mlp") {
            if (field == "hidden_layers") h.mlp.hidden_layers = static_cast<int>(as_int(key, v));
            else if (field == "width") h.mlp.width = static_cast<int>(as_int(key, v));
            else if (field == "learning_rate") h.mlp.learning_rate = as_double(key, v);
            else if (field == "epochs") h.mlp.epochs = static_cast<int>(as_int(key, v));
            else if (field == "batch_size") h.mlp.batch_size = static_cast<int>(as_int(key, v));
            else if (field == "beta1") h.mlp.beta1 = as_double(key, v);
            else if (field == "beta2") h.mlp.beta2 = as_double(key, v);
            else if (field == "epsilon") h.mlp.epsilon = as_double(key, v);
            else known = false;
        } else if (ns == "gmdh") {
            if (field == "max_layers") h.gmdh.max_layers = static_cast<int>(as_int(key, v));
            else if (field == "neurons_kept") h.gmdh.neurons_kept = static_cast<int>(as_int(key, v));
            else if (field == "ridge") h.gmdh.ridge = as_double(key, v);
            else if (field == "min_improvement") h.gmdh.min_improvement = as_double(key, v);
            else if (field == "export_term_budget")
                h.gmdh.export_term_budget = static_cast<std::size_t>(as_int(key, v));
            else if (field == "features") {
                h.features.clear();
                for (const std::string& f : split(v, ',')) {
                    h.features.push_back(trim(f));
                    feature_value(h.features.back(), make_point(1.0, 1.0, 1.0));
                }
            } else known = false;
        } else if (ns == "sweep") {
            const auto dot2 = field.find('.');
            const std::string which = field.substr(0, dot2);
            const std::string sub = dot2 == std::string::npos ? "" : field.substr(dot2 + 1);
            SweepSpec* s = which == "train" ? &h.train : which == "dense" ? &h.dense : which == "eval" ? &config.eval : nullptr;
            known = s && apply_sweep(sub, key, v, *s);
        } else {
            known = false;
        }
        if (!known) throw ConfigError("unknown config key '" + key + "'");
    }
}

DirectoryLock::DirectoryLock(const fs::path& dir) {
    fs::create_directories(dir);
    path_ = dir / ".lock";
    const int fd = ::open(path_.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (fd < 0) throw ConfigError("cannot create lock file " + path_.string());
    if (::flock(fd, LOCK_EX | LOCK_NB) != 0) {
        ::close(fd);
        throw ConfigError("output directory " + dir.string() + " is in use by another run");
    }
    fd_ = fd;
}

DirectoryLock::~DirectoryLock() {
    if (fd_ >= 0) {
        std::error_code ec;
        fs::remove(path_, ec);
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

}  // namespace llc
