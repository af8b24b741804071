#include "medlink/errors.hpp"

namespace medlink {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parse: return "parse error";
    case ErrorKind::conflict: return "conflict";
    case ErrorKind::validation: return "validation error";
    case ErrorKind::not_found: return "not found";
    case ErrorKind::precondition: return "precondition violated";
    case ErrorKind::config: return "configuration error";
    case ErrorKind::backend: return "backend failure";
    case ErrorKind::auth: return "authentication failure";
    case ErrorKind::unparseable: return "unparseable output";
    case ErrorKind::undefined_metric: return "undefined metric";
    case ErrorKind::io: return "I/O error";
  }
  return "error";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& what)
    : Error(ErrorKind::parse, source + ":" + std::to_string(line) + ": " + what), line_(line) {}

}  // namespace medlink
