#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ggfps {

/// Process exit codes shared by the library error types and the CLI.
enum class ExitCode : int
{
  ok = 0,
  config = 1,
  io = 2,
  numerical = 3,
};

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
  Error(ExitCode code, const std::string& what)
    : std::runtime_error(what), code_(code)
  {
  }

  ExitCode code() const noexcept { return code_; }

private:
  ExitCode code_;
};

/// Invalid arguments, configuration values, or preconditions.
class ConfigError : public Error
{
public:
  explicit ConfigError(const std::string& what) : Error(ExitCode::config, what) {}
};

/// Requested more items than are available.
class CapacityError : public ConfigError
{
public:
  using ConfigError::ConfigError;
};

/// Misuse of an incremental state object.
class StateError : public ConfigError
{
public:
  using ConfigError::ConfigError;
};

/// File system or stream failures.
class IoError : public Error
{
public:
  explicit IoError(const std::string& what) : Error(ExitCode::io, what) {}
};

/// Malformed input text. Carries the 1-based frame and line where it was found.
class ParseError : public Error
{
public:
  ParseError(std::size_t frame, std::size_t line, const std::string& what)
    : Error(ExitCode::config,
            "frame " + std::to_string(frame) + ", line " + std::to_string(line) + ": " + what),
      frame_(frame), line_(line)
  {
  }

  std::size_t frame() const noexcept { return frame_; }
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t frame_;
  std::size_t line_;
};

/// Non-finite values, failed factorizations, degenerate statistics.
class NumericalError : public Error
{
public:
  explicit NumericalError(const std::string& what) : Error(ExitCode::numerical, what) {}
};

/// Cholesky breakdown; `pivot` is the 0-based column where the factorization failed.
class FactorizationError : public NumericalError
{
public:
  explicit FactorizationError(std::ptrdiff_t pivot)
    : NumericalError("matrix is not positive definite (pivot " + std::to_string(pivot) + ")"),
      pivot_(pivot)
  {
  }

  std::ptrdiff_t pivot() const noexcept { return pivot_; }

private:
  std::ptrdiff_t pivot_;
};

} // namespace ggfps
