#include "pqi/grid.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "pqi/errors.hpp"

namespace pqi {

Grid::Grid(int n, double length) : n_(n), length_(length) {
    if (n < 8) throw InvalidArgument("Grid: N must be >= 8, got " + std::to_string(n));
    if (n % 4 != 0) throw InvalidArgument("Grid: N must be divisible by 4");
    if (!(length > 0.0) || !std::isfinite(length)) throw InvalidArgument("Grid: L must be positive");
}

double Grid::frequency(int bin) const noexcept {
    return 2.0 * std::numbers::pi * signed_mode(bin) / length_;
}

bool Grid::in_closed_region(int i, int j, int k) const noexcept {
    return i >= lo() && i <= hi() && j >= lo() && j <= hi() && k >= lo() && k <= hi();
}

bool Grid::in_open_region(int i, int j, int k) const noexcept {
    return i > lo() && i < hi() && j > lo() && j < hi() && k > lo() && k < hi();
}

void require_same_grid(const Grid& a, const Grid& b) {
    if (a != b) throw InvalidArgument("grid mismatch");
}

}  // namespace pqi
