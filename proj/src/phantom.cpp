#include "pqi/phantom.hpp"

#include <cmath>

#include "pqi/errors.hpp"
#include "pqi/random.hpp"

namespace pqi {

double bump(double r) noexcept {
    if (!(r < 1.0)) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - r * r));
}

ScalarField bump_field(const Grid& grid, const Vec3& center, double radius, double amplitude) {
    ScalarField out(grid);
    for (std::size_t idx = 0; idx < grid.size(); ++idx) {
        const Vec3 x = grid.position(idx);
        double r2 = 0.0;
        for (int d = 0; d < 3; ++d) r2 += (x[d] - center[d]) * (x[d] - center[d]);
        out[idx] = amplitude * bump(std::sqrt(r2) / radius);
    }
    return out;
}

const std::vector<std::string>& phantom_names() {
    static const std::vector<std::string> names{"null", "P1", "P2", "P3-lowp"};
    return names;
}

Coefficients make_phantom(const std::string& name, std::uint64_t seed, const Grid& grid) {
    bool known = false;
    for (const auto& n : phantom_names()) known = known || n == name;
    if (!known) throw UnknownPhantom(name);

    const double L = grid.length();
    Rng rng(seed);
    Vec3 center;
    for (double& c : center) c = 0.5 * L + uniform(rng, -L / 64.0, L / 64.0);

    Coefficients c{ScalarField::constant(grid, 1.0), ScalarField(grid), 3.0, 0.5, 0.1};
    if (name == "null") return c;
    c.a = bump_field(grid, center, 3.0 * L / 16.0, 0.5);
    if (name == "P2") {
        const Vec3 cs{center[0] + L / 16.0, center[1] - L / 32.0, center[2] + L / 32.0};
        c.sigma += bump_field(grid, cs, L / 8.0, 0.1);
    }
    if (name == "P3-lowp") c.p = 1.5;
    return c;
}

}  // namespace pqi
