#pragma once

#include <stdexcept>
#include <string>

namespace svgsmith {

/// Base of every error the library throws. `code()` is a stable
/// machine-readable identifier surfaced in CLI/HTTP error payloads.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& message) : Error("ARGUMENT", message) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, int line, int column)
      : Error("PARSE", message + " at line " + std::to_string(line) + ", column " +
                           std::to_string(column)),
        line_(line),
        column_(column) {}
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

class DegenerateShapeError : public Error {
 public:
  explicit DegenerateShapeError(const std::string& message) : Error("DEGENERATE_SHAPE", message) {}
};

class RenderError : public Error {
 public:
  RenderError(const std::string& path_id, const std::string& message)
      : Error("RENDER", message + " (path " + path_id + ")"), path_id_(path_id) {}
  const std::string& path_id() const noexcept { return path_id_; }

 private:
  std::string path_id_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("IO", message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("CONFIG", message) {}
};

class TransportError : public Error {
 public:
  explicit TransportError(const std::string& message) : Error("TRANSPORT", message) {}
};

/// An LLM reply (or external payload) that could not be interpreted.
class FormatError : public Error {
 public:
  FormatError(const std::string& message, std::string raw)
      : Error("FORMAT", message), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

/// A persisted payload written under a schema this build does not read.
class VersionError : public Error {
 public:
  explicit VersionError(const std::string& message) : Error("VERSION", message) {}
};

/// A loss or parameter became non-finite during optimization.
class OptimizationError : public Error {
 public:
  OptimizationError(const std::string& path_id, const std::string& message)
      : Error("OPTIMIZATION", message + (path_id.empty() ? "" : " (path " + path_id + ")")), path_id_(path_id) {}
  const std::string& path_id() const noexcept { return path_id_; }

 private:
  std::string path_id_;
};

}  // namespace svgsmith
