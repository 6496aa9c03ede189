#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace metaland {

/// Incompatible tensor shapes or model/batch layouts.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A value outside its permitted domain (labels, non-scalar losses, ...).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid model, generator, training or experiment configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Degenerate statistics (single-element batchnorm channel, zero-variance PCA input).
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No region/season in a meta-set satisfies the requested (k, n) constraint.
class SamplingExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training loss became non-finite or exceeded the divergence threshold.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A metric whose formula is undefined on the given confusion matrix.
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A referenced input file does not exist or cannot be opened.
class MissingInput : public std::runtime_error {
 public:
  explicit MissingInput(const std::string& path)
      : std::runtime_error("missing input: " + path), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// An output file or directory cannot be created or written.
class OutputError : public std::runtime_error {
 public:
  explicit OutputError(const std::string& path) : std::runtime_error("cannot write " + path) {}
};

/// Malformed binary or text file; carries the byte offset of the fault.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& path, std::uint64_t offset, const std::string& what)
      : std::runtime_error(path + ": " + what + " at byte offset " + std::to_string(offset)),
        path_(path),
        offset_(offset) {}
  const std::string& path() const noexcept { return path_; }
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::string path_;
  std::uint64_t offset_;
};

/// File format version this build cannot read.
class UnsupportedVersion : public FormatError {
 public:
  UnsupportedVersion(const std::string& path, std::uint64_t offset, std::uint32_t version)
      : FormatError(path, offset, "unsupported version " + std::to_string(version)),
        version_(version) {}
  std::uint32_t version() const noexcept { return version_; }

 private:
  std::uint32_t version_;
};

}  // namespace metaland
