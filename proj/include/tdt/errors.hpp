#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tdt {

// All recoverable failures are typed exceptions. category() is a stable,
// machine-parsable token; the CLI prints it as "error: <category>: <what>".
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& msg)
      : std::runtime_error(msg), category_(std::move(category)) {}
  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

// Tensor shape disagreement at an op boundary.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error("shape", msg) {}
};

// Out-of-range target/token index.
class IndexError : public Error {
 public:
  explicit IndexError(const std::string& msg) : Error("index", msg) {}
};

// Caller violated an operation precondition.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& msg) : Error("contract", msg) {}
};

// Invalid configuration (layer chains, train settings, dataset specs, keys).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error("config", msg) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error("io", msg) {}
};

// Checkpoint file problems, each distinct so callers can tell them apart.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& msg) : Error("format", msg) {}
};

class VersionError : public Error {
 public:
  explicit VersionError(const std::string& msg) : Error("version", msg) {}
};

class TruncationError : public Error {
 public:
  explicit TruncationError(const std::string& msg) : Error("truncated", msg) {}
};

// Training produced a non-finite loss; carries where it happened.
class DivergedError : public Error {
 public:
  DivergedError(int64_t epoch, int64_t batch, const std::string& msg)
      : Error("diverged", msg), epoch(epoch), batch(batch) {}
  int64_t epoch;
  int64_t batch;
};

}  // namespace tdt
