#pragma once

#include <stdexcept>
#include <string>

namespace llc {

// Every error carries a short machine-readable kind used by the CLI when it
// prints its one-line failure message.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error("domain", what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config", what) {}
};

class SimulationFault : public Error {
public:
    explicit SimulationFault(const std::string& what) : Error("simulation", what) {}
};

class ModelError : public Error {
public:
    explicit ModelError(const std::string& what) : Error("model", what) {}
};

class FitError : public Error {
public:
    explicit FitError(const std::string& what) : Error("fit", what) {}
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& what) : Error("parse", what) {}
};

class FormatError : public Error {
public:
    explicit FormatError(const std::string& what) : Error("format", what) {}
};

class ExportTooLarge : public Error {
public:
    explicit ExportTooLarge(const std::string& what) : Error("export_too_large", what) {}
};

}  // namespace llc
