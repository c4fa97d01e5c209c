#include "pqi/fft.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "pqi/errors.hpp"

namespace pqi {

namespace {

// Twiddles exp(-2 pi i k / n), k < n/2, each computed directly.
const std::vector<cplx>& twiddles(std::size_t n) {
    thread_local std::vector<std::vector<cplx>> cache(64);
    const int lg = std::countr_zero(n);
    auto& t = cache[lg];
    if (t.size() != n / 2) {
        t.resize(n / 2);
        for (std::size_t k = 0; k < n / 2; ++k)
            t[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
    }
    return t;
}

}  // namespace

void fft1d(std::span<cplx> data, int sign) {
    const std::size_t n = data.size();
    if (n == 0 || (n & (n - 1)) != 0) throw InvalidArgument("fft: length must be a power of two");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i], data[j]);
    }
    const std::vector<cplx>& tw = twiddles(n);
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        const std::size_t step = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < half; ++k) {
                const cplx t = tw[k * step];
                const cplx w = sign < 0 ? t : std::conj(t);
                const cplx u = data[i + k];
                const cplx v = data[i + k + half] * w;
                data[i + k] = u + v;
                data[i + k + half] = u - v;
            }
        }
    }
}

namespace {

void transform3(std::vector<cplx>& v, int n, int sign) {
    std::vector<cplx> line(n);
    const std::size_t nn = static_cast<std::size_t>(n);
    const std::size_t strides[3] = {1, nn, nn * nn};
    for (int axis = 0; axis < 3; ++axis) {
        const std::size_t stride = strides[axis];
        for (std::size_t base = 0; base < nn * nn * nn; ++base) {
            if ((base / stride) % nn != 0) continue;
            for (std::size_t m = 0; m < nn; ++m) line[m] = v[base + m * stride];
            fft1d(line, sign);
            for (std::size_t m = 0; m < nn; ++m) v[base + m * stride] = line[m];
        }
    }
}

}  // namespace

ScalarField fft3(const ScalarField& u) {
    if (u.domain() != Domain::space) throw InvalidArgument("fft3: expects a space-domain field");
    const Grid& g = u.grid();
    if (!is_power_of_two(g.n())) throw InvalidArgument("fft3: N must be a power of two");
    std::vector<cplx> v(u.values().begin(), u.values().end());
    transform3(v, g.n(), -1);
    const double w = g.cell_volume();
    for (auto& z : v) z *= w;
    return ScalarField(g, std::move(v), Domain::frequency);
}

ScalarField ifft3(const ScalarField& uhat) {
    if (uhat.domain() != Domain::frequency) throw InvalidArgument("ifft3: expects a frequency-domain field");
    const Grid& g = uhat.grid();
    if (!is_power_of_two(g.n())) throw InvalidArgument("ifft3: N must be a power of two");
    std::vector<cplx> v(uhat.values().begin(), uhat.values().end());
    transform3(v, g.n(), +1);
    const double L = g.length();
    const double w = 1.0 / (L * L * L);
    for (auto& z : v) z *= w;
    return ScalarField(g, std::move(v), Domain::space);
}

Vec3 wave_vector(const Grid& grid, std::size_t idx) {
    const auto [a, b, c] = grid.ijk(idx);
    return {grid.frequency(a), grid.frequency(b), grid.frequency(c)};
}

VectorField spectral_gradient(const ScalarField& u) {
    const Grid& g = u.grid();
    const ScalarField uh = fft3(u);
    VectorField out(g);
    const cplx I{0.0, 1.0};
    for (int d = 0; d < 3; ++d) {
        ScalarField dh(g, Domain::frequency);
        for (std::size_t idx = 0; idx < g.size(); ++idx) {
            const int bin = g.ijk(idx)[d];
            if (bin == g.n() / 2) continue;
            dh[idx] = I * g.frequency(bin) * uh[idx];
        }
        out[d] = ifft3(dh);
    }
    return out;
}

ScalarField spectral_laplacian(const ScalarField& u) {
    const Grid& g = u.grid();
    ScalarField uh = fft3(u);
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        const Vec3 k = wave_vector(g, idx);
        uh[idx] *= -(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
    }
    return ifft3(uh);
}

}  // namespace pqi
