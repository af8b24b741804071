#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace medlink {

// Every failure the pipeline raises derives from Error so the CLI can map it
// onto an exit code in one place.
enum class ErrorKind {
  parse,         // malformed input line / record
  conflict,      // duplicate id or competing cache bytes
  validation,    // value-level invariant broken (NaN row, dim 0, checksum)
  not_found,     // unknown id
  precondition,  // caller broke an operation's contract
  config,        // missing / invalid configuration
  backend,       // completion backend failed (after retries)
  auth,          // completion backend rejected credentials
  unparseable,   // model output matched no candidate
  undefined_metric,
  io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what);

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace medlink
