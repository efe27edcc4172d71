#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace msbft {

using NodeId = std::uint32_t;
using Value = std::int64_t;

// Wire encoding of "no value" (the undecided state of a kernel, or a node
// that never received the message it waits for).
inline constexpr Value kBottom = std::numeric_limits<Value>::min();

// Value a node falls back to when it has to decide but holds kBottom.
inline constexpr Value kDefaultValue = 0;

inline constexpr Value or_default(Value v) { return v == kBottom ? kDefaultValue : v; }

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Topology parameters that cannot be realised (base too small, size overflow,
// infeasible regular degree, non-divisible layer sizes).
class SizingError : public Error {
 public:
  using Error::Error;
};

// A caller violated an operation's precondition, e.g. a kernel was handed more
// corrupted participants than it tolerates.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Sampling or generation gave up after exhausting its attempt budget.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace msbft
