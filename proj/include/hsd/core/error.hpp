#pragma once

#include <stdexcept>
#include <string>

namespace hsd {

// Process exit codes used by the CLI. Each error class below maps to one.
enum class ExitCode : int {
    ok = 0,
    unexpected = 1,
    usage = 2,
    config = 3,
    data = 4,
    model = 5,
    backend = 6,
    training = 7,
    io = 8,
};

class Error : public std::runtime_error {
  public:
    explicit Error(const std::string &what, ExitCode code = ExitCode::unexpected)
        : std::runtime_error(what), code_(code) {}

    [[nodiscard]] ExitCode exit_code() const noexcept { return code_; }

  private:
    ExitCode code_;
};

// Invalid or inconsistent configuration (spec fields, tokenizer not loaded, ...).
class ConfigError : public Error {
  public:
    explicit ConfigError(const std::string &what) : Error("configuration error: " + what, ExitCode::config) {}
};

// ModelSpec that cannot be realised (dimension mismatch, length limits).
class SpecError : public Error {
  public:
    explicit SpecError(const std::string &what) : Error("spec error: " + what, ExitCode::config) {}
};

// Input table is missing a required column.
class SchemaError : public Error {
  public:
    explicit SchemaError(const std::string &what) : Error("schema error: " + what, ExitCode::data) {}
};

// Malformed value inside an otherwise well-formed input.
class ParseError : public Error {
  public:
    explicit ParseError(const std::string &what) : Error("parse error: " + what, ExitCode::data) {}
};

// Rows or splits that violate a data contract (missing class, too few rows).
class DataError : public Error {
  public:
    explicit DataError(const std::string &what) : Error("data error: " + what, ExitCode::data) {}
};

// Checkpoint or pretrained encoder that cannot be resolved or does not match its spec.
class CheckpointError : public Error {
  public:
    explicit CheckpointError(const std::string &what) : Error("checkpoint error: " + what, ExitCode::model) {}
};

// Rewriter backend failure after retries.
class BackendError : public Error {
  public:
    explicit BackendError(const std::string &what, bool retryable = true)
        : Error("rewriter backend error: " + what, ExitCode::backend), retryable_(retryable) {}

    [[nodiscard]] bool retryable() const noexcept { return retryable_; }

  private:
    bool retryable_;
};

class TrainingError : public Error {
  public:
    explicit TrainingError(const std::string &what) : Error("training error: " + what, ExitCode::training) {}
};

class IoError : public Error {
  public:
    explicit IoError(const std::string &what) : Error("i/o error: " + what, ExitCode::io) {}
};

}  // namespace hsd
