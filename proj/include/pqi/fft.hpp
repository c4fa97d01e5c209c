#pragma once

#include <span>

#include "pqi/field.hpp"

namespace pqi {

/// In-place radix-2 transform, unnormalized; sign -1 forward, +1 inverse.
void fft1d(std::span<cplx> data, int sign);

/// Forward transform approximating u^(xi) = h^3 sum exp(-i xi.x) u(x), xi = 2 pi k / L.
/// Bin (a, b, c) holds mode (signed_mode(a), signed_mode(b), signed_mode(c)).
ScalarField fft3(const ScalarField& u);
/// Inverse of fft3: u(x) = L^-3 sum exp(i xi.x) u^(xi).
ScalarField ifft3(const ScalarField& uhat);

/// Angular wave vector of frequency bin idx.
Vec3 wave_vector(const Grid& grid, std::size_t idx);

// Exact derivatives of the trigonometric interpolant; the Nyquist bin is
// treated as zero for odd derivatives.
VectorField spectral_gradient(const ScalarField& u);
ScalarField spectral_laplacian(const ScalarField& u);

}  // namespace pqi
