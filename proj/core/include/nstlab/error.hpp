#pragma once

#include <stdexcept>
#include <string>

namespace nst {

enum class ErrorKind {
  Dimension,       // incompatible tensor shapes
  Domain,          // numeric input outside an operation's domain
  Contract,        // caller broke a documented precondition
  MissingLeaf,     // parameter not reachable from the loss
  Config,          // invalid configuration value or key
  Io,              // file missing or unwritable
  Parse,           // malformed file content
  LabelDomain,     // labels not 0-based contiguous
  EmptyPairPool,   // no equivalence class of size >= 2
  DegenerateEmbedding,
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

const char* error_kind_name(ErrorKind kind);

}  // namespace nst
