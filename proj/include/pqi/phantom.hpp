#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pqi/forward.hpp"

namespace pqi {

/// C-infinity cutoff exp(1 - 1/(1 - r^2)) for r < 1, zero otherwise; equals 1 at r = 0.
double bump(double r) noexcept;

/// Smooth radial bump amplitude * bump(|x - center| / radius) as a real field.
ScalarField bump_field(const Grid& grid, const Vec3& center, double radius, double amplitude);

/// Registered synthetic coefficient pairs: null, P1, P2, P3-lowp.
///
/// The a-bump has amplitude 0.5 and radius 3L/16 around the box center,
/// jittered by at most L/64 per axis from the seed.
Coefficients make_phantom(const std::string& name, std::uint64_t seed, const Grid& grid);
const std::vector<std::string>& phantom_names();

}  // namespace pqi
