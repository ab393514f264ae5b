#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace sfc {

// Error categories surfaced by the library. Callers switch on kind() rather
// than on message text.
enum class ErrorKind {
  InvalidSpec,
  InvalidInput,
  MissingPlacement,
  InvalidChainSet,
  TagSpaceExhausted,
  NoPath,
  ForwardingHole,
  Infeasible,
  CapacityExhausted,
  Parse,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Integer identifier tagged by the domain it belongs to, so a rack index can
// never be passed where a machine index is expected.
template <class Tag>
struct Id {
  int value = -1;

  constexpr Id() = default;
  constexpr explicit Id(int v) : value(v) {}

  constexpr bool valid() const { return value >= 0; }
  constexpr auto operator<=>(const Id&) const = default;

  friend std::ostream& operator<<(std::ostream& os, Id id) {
    return os << id.value;
  }
};

using RackId = Id<struct RackTag>;
using MachineId = Id<struct MachineTag>;
using SwitchId = Id<struct SwitchTag>;
using LinkId = Id<struct LinkTag>;
using InstanceId = Id<struct InstanceTag>;

// Bandwidth between co-located endpoints is unconstrained.
inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

}  // namespace sfc

template <class Tag>
struct std::hash<sfc::Id<Tag>> {
  std::size_t operator()(sfc::Id<Tag> id) const noexcept {
    return std::hash<int>{}(id.value);
  }
};
