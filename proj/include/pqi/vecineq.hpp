#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pqi/grid.hpp"

namespace pqi {

using CVecN = std::vector<cplx>;

/// |x|^(p-2) from n2 = |x|^2; 0 at x = 0 (every p).
double pmap_weight(double n2, double p) noexcept;

/// |x|^(p-2) x. The solver form replaces |x|^2 by max(reg2 + |x|^2, floor2);
/// reg2 = floor2 = 0 is the plain map.
CVec3 pmap(const CVec3& x, double p, double reg2 = 0.0, double floor2 = 0.0) noexcept;
CVecN pmap(std::span<const cplx> x, double p);

struct PVec {
    CVec3 value{};
    double p = 3.0;
    /// Finite entries and p > 1, else InvalidArgument.
    void validate() const;
};

struct SamplePair {
    CVecN xi;
    CVecN zeta;
};

/// Equal thirds of: independent uniform points in the R-ball of C^n;
/// near-collinear pairs zeta = lambda xi + small; near-equal pairs
/// zeta = xi + tiny, with log-uniform separations.
std::vector<SamplePair> sample_pairs(std::uint64_t seed, int n, double R, std::size_t count);

/// Relative slack for the explicit-constant inequalities (rounding only).
inline constexpr double kIneqSlack = 1e-12;

struct LemmaA1Report {
    double p = 0.0;
    int n = 3;
    std::size_t samples = 0;
    std::size_t skipped = 0;  // xi = zeta
    /// |pmap(xi) - pmap(zeta)| / ((|xi| + |zeta|)^(p-2) |xi - zeta|)
    double max_ratio1 = 0.0;
    /// Re[(pmap(xi) - pmap(zeta)) . conj(xi - zeta)] / ((|xi| + |zeta|)^(p-2) |xi - zeta|^2)
    double min_ratio2 = 0.0;
    double max_ratio2 = 0.0;
    /// ||xi|^p - |zeta|^p| / (p (|xi|^(p-1) + |zeta|^(p-1)) |xi - zeta|)
    double max_ratio3 = 0.0;
    std::size_t violations3 = 0;
    bool ok() const noexcept { return violations3 == 0; }
};

LemmaA1Report check_lemma_A1(double p, std::size_t samples, std::uint64_t seed = 1, int n = 3, double R = 1.0);

struct LemmaA2Report {
    double p = 0.0;
    double R = 1.0;
    int n = 3;
    std::size_t samples = 0;
    std::size_t skipped = 0;
    /// 2(p-2) and p-3 for p >= 3; 1 and 0 for p in (2, 3).
    double C = 0.0;
    double mu1 = 0.0;
    double max_ratio = 0.0;
    std::size_t violations = 0;
    bool ok() const noexcept { return violations == 0; }
};

/// | |xi|^(p-2) - |zeta|^(p-2) | <= C R^mu1 |xi - zeta|^min(p-2, 1) on the R-ball.
/// InvalidArgument for p <= 2.
LemmaA2Report check_lemma_A2(double p, double R, std::size_t samples, std::uint64_t seed = 1, int n = 3);

/// tr(A H + B conj(H)) with
/// A_jk = |xi|^(p-4) xi_j conj(xi_k) - |zeta|^(p-4) zeta_j conj(zeta_k),
/// B_jk = |xi|^(p-4) xi_j xi_k - |zeta|^(p-4) zeta_j zeta_k
/// (terms of a zero vector are 0). H is n x n row-major with H^T = H
/// (NonSymmetricH otherwise); p > 2.
cplx trace_AB(std::span<const cplx> xi, std::span<const cplx> zeta, std::span<const cplx> H, double p);

struct TraceABReport {
    double p = 0.0;
    double R = 1.0;
    int n = 3;
    std::size_t samples = 0;
    std::size_t skipped = 0;
    double mu2 = 0.0;  // 3(p-2)/4
    /// max |trace_AB| / (R^mu2 ||H||_F |xi - zeta|^(min(p-2,1)/4))
    double max_ratio = 0.0;
};

TraceABReport check_trace_AB(double p, double R, std::size_t samples, std::uint64_t seed = 1, int n = 3);

struct RateFit {
    double expected = 0.0;  // min(p-2, 1)/4
    double min_slope = 0.0;
    double mean_slope = 0.0;
    std::size_t cases = 0;
};

/// Slope of log|trace_AB(xi, xi + t d, H)| against log t for t = 2^-4 .. 2^-20,
/// over random xi, d, H.
RateFit trace_AB_rate(double p, std::size_t cases, std::uint64_t seed = 1, int n = 3);

/// Stored empirical constants for seed 1, 1e5 samples, n = 3, R = 1.
struct Baseline {
    double p;
    double max_ratio1;
    double min_ratio2;
    double max_ratio2;
    double max_trace_ratio;  // p > 2 only, else 0
};
std::optional<Baseline> reference_baseline(double p);
/// New maxima may exceed (new minima undercut) the baseline by at most 1%.
bool within_baseline(const LemmaA1Report& r, const Baseline& b);
bool within_baseline(const TraceABReport& r, const Baseline& b);

}  // namespace pqi
