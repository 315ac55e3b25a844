#pragma once

#include <stdexcept>
#include <string>

namespace mtmgossip {

/// Invalid caller-supplied argument (empty node set, out-of-range id, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A random topology could not be made to satisfy its invariants.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exact computation requested beyond its supported size.
class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal precondition between modules did not hold.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The synchronizer observed an advertisement sequence that cannot occur on a
/// correct substrate.
class ProtocolViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration or input file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mtmgossip
