#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "llc/converter.hpp"
#include "llc/mlp.hpp"
#include "llc/pipeline.hpp"
#include "llc/simulator.hpp"

namespace llc {

namespace fs = std::filesystem;

// CSV files use '.' decimals, ',' separators, LF endings and 17 significant
// digits so every value round-trips exactly.

void write_dataset(const std::vector<GainSample>& samples, const fs::path& path);
/// An empty file yields an empty list (with a warning).
std::vector<GainSample> read_dataset(const fs::path& path);

void write_error_report(const ErrorReport& report, const fs::path& csv_path);
ErrorReport read_error_report(const fs::path& csv_path);
nlohmann::json summary_json(const ErrorReport& report);

void write_history(const std::vector<EpochLoss>& history, const fs::path& path);
std::vector<EpochLoss> read_history(const fs::path& path);

void write_waveform(const Waveform& waveform, const fs::path& path);
std::vector<WaveformSample> read_waveform(const fs::path& path);

void save_json(const nlohmann::json& j, const fs::path& path);
nlohmann::json load_json(const fs::path& path);

/// Flat `key = value` file; '#' starts a comment. Duplicate keys keep the last value.
using ConfigMap = std::map<std::string, std::string>;
ConfigMap read_config(const fs::path& path);

/// Everything a pipeline command can be configured with.
struct RunConfig {
    HybridConfig hybrid;
    SweepSpec eval = default_evaluation_sweep();
};

/// Applies `sim.*`, `mlp.*`, `gmdh.*`, `sweep.{train,dense,eval}.*`, `seed`
/// and `threads`. Unknown keys and bad values throw ConfigError.
void apply_config(const ConfigMap& values, RunConfig& config);

std::vector<double> parse_double_list(const std::string& text);

/// Exclusive lock on an output directory, released on destruction. Throws
/// ConfigError when another run already holds it.
class DirectoryLock {
public:
    explicit DirectoryLock(const fs::path& dir);
    ~DirectoryLock();
    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
    fs::path path_;
    int fd_ = -1;
};

}  // namespace llc
