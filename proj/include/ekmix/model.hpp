#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "ekmix/energy.hpp"
#include "ekmix/linalg.hpp"

namespace ekmix {

/// n species with their energy laws, the symmetric friction matrix b and the
/// relaxation strength eps. The diagonal of b is never read.
struct MixtureModel {
  std::vector<EnergyLaw> laws;
  Matrix b;
  double eps = 1.0;

  [[nodiscard]] std::size_t species() const { return laws.size(); }

  /// Checks laws, the shape/symmetry/sign of b and connectivity of the friction
  /// graph. eps may be zero (the limit system); negative eps is rejected.
  void validate() const;
};

/// The three evolution systems: the eps-relaxation system with one velocity per
/// species, the first-order Chapman-Enskog system and the zeroth-order limit.
enum class SystemKind { relaxation, chapman_enskog, limit };

std::string_view to_string(SystemKind kind);
SystemKind parse_system_kind(std::string_view name);

}  // namespace ekmix
