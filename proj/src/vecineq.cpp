#include "pqi/vecineq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pqi/errors.hpp"
#include "pqi/random.hpp"

namespace pqi {

double pmap_weight(double n2, double p) noexcept {
    if (n2 == 0.0) return 0.0;
    return std::pow(n2, 0.5 * (p - 2.0));
}

CVec3 pmap(const CVec3& x, double p, double reg2, double floor2) noexcept {
    const double n2 = std::norm(x[0]) + std::norm(x[1]) + std::norm(x[2]);
    if (n2 == 0.0 && reg2 == 0.0) return {};
    const double t = std::max(reg2 + n2, floor2);
    const double w = pmap_weight(t, p);
    return {w * x[0], w * x[1], w * x[2]};
}

namespace {

double norm2(std::span<const cplx> x) {
    double s = 0.0;
    for (const cplx& v : x) s += std::norm(v);
    return s;
}

double dist(std::span<const cplx> a, std::span<const cplx> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::norm(a[i] - b[i]);
    return std::sqrt(s);
}

double gaussian(Rng& rng) {
    // Box-Muller on the portable uniform
    const double u1 = 1.0 - uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

CVecN gaussian_vec(Rng& rng, int n) {
    CVecN v(static_cast<std::size_t>(n));
    for (auto& c : v) c = {gaussian(rng), gaussian(rng)};
    return v;
}

CVecN in_ball(Rng& rng, int n, double R) {
    CVecN v = gaussian_vec(rng, n);
    const double r = R * std::pow(uniform01(rng), 1.0 / (2.0 * n)) / std::sqrt(norm2(v));
    for (auto& c : v) c *= r;
    return v;
}

void clamp_to_ball(CVecN& v, double R) {
    const double n = std::sqrt(norm2(v));
    if (n > R)
        for (auto& c : v) c *= R / n;
}

CVecN perturbed(Rng& rng, const CVecN& base, double size) {
    CVecN d = gaussian_vec(rng, static_cast<int>(base.size()));
    const double s = size / std::sqrt(norm2(d));
    CVecN out = base;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * d[i];
    return out;
}

double log_uniform(Rng& rng, double lo, double hi) { return lo * std::pow(hi / lo, uniform01(rng)); }

std::vector<cplx> random_symmetric(Rng& rng, int n) {
    std::vector<cplx> H(static_cast<std::size_t>(n * n));
    for (int j = 0; j < n; ++j)
        for (int k = j; k < n; ++k) {
            const cplx v{uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0)};
            H[static_cast<std::size_t>(j * n + k)] = v;
            H[static_cast<std::size_t>(k * n + j)] = v;
        }
    return H;
}

}  // namespace

CVecN pmap(std::span<const cplx> x, double p) {
    const double w = pmap_weight(norm2(x), p);
    CVecN out(x.begin(), x.end());
    for (auto& c : out) c *= w;
    return out;
}

void PVec::validate() const {
    if (!(p > 1.0) || !std::isfinite(p)) throw InvalidArgument("PVec: p must lie in (1, inf)");
    for (const cplx& c : value)
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) throw InvalidArgument("PVec: non-finite entry");
}

std::vector<SamplePair> sample_pairs(std::uint64_t seed, int n, double R, std::size_t count) {
    if (n < 1) throw InvalidArgument("sample_pairs: n must be positive");
    if (!(R > 0.0)) throw InvalidArgument("sample_pairs: R must be positive");
    Rng rng(seed);
    std::vector<SamplePair> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        SamplePair s;
        s.xi = in_ball(rng, n, R);
        switch (i % 3) {
            case 0:
                s.zeta = in_ball(rng, n, R);
                break;
            case 1: {
                const cplx lambda = std::polar(uniform01(rng), uniform(rng, -std::numbers::pi, std::numbers::pi));
                CVecN z = s.xi;
                for (auto& c : z) c *= lambda;
                s.zeta = perturbed(rng, z, log_uniform(rng, 1e-8, 1e-1) * R);
                break;
            }
            default:
                s.zeta = perturbed(rng, s.xi, log_uniform(rng, 1e-10, 1e-2) * R);
                break;
        }
        clamp_to_ball(s.zeta, R);
        out.push_back(std::move(s));
    }
    return out;
}

LemmaA1Report check_lemma_A1(double p, std::size_t samples, std::uint64_t seed, int n, double R) {
    if (!(p > 1.0)) throw InvalidArgument("check_lemma_A1: p must exceed 1");
    if (samples < 1) throw InvalidArgument("check_lemma_A1: samples must be >= 1");
    LemmaA1Report rep;
    rep.p = p;
    rep.n = n;
    rep.samples = samples;
    rep.min_ratio2 = std::numeric_limits<double>::infinity();
    for (const SamplePair& s : sample_pairs(seed, n, R, samples)) {
        const double d = dist(s.xi, s.zeta);
        if (d == 0.0) {
            ++rep.skipped;
            continue;
        }
        const double a = std::sqrt(norm2(s.xi));
        const double b = std::sqrt(norm2(s.zeta));
        const CVecN pa = pmap(s.xi, p);
        const CVecN pb = pmap(s.zeta, p);
        double diff2 = 0.0;
        cplx inner = 0.0;
        for (std::size_t i = 0; i < pa.size(); ++i) {
            diff2 += std::norm(pa[i] - pb[i]);
            inner += (pa[i] - pb[i]) * std::conj(s.xi[i] - s.zeta[i]);
        }
        const double scale = std::pow(a + b, p - 2.0);
        const double r1 = std::sqrt(diff2) / (scale * d);
        const double r2 = inner.real() / (scale * d * d);
        rep.max_ratio1 = std::max(rep.max_ratio1, r1);
        rep.min_ratio2 = std::min(rep.min_ratio2, r2);
        rep.max_ratio2 = std::max(rep.max_ratio2, r2);

        const double lhs = std::abs(std::pow(a, p) - std::pow(b, p));
        const double rhs = p * (std::pow(a, p - 1.0) + std::pow(b, p - 1.0)) * d;
        rep.max_ratio3 = std::max(rep.max_ratio3, lhs / rhs);
        if (lhs > rhs * (1.0 + kIneqSlack)) ++rep.violations3;
    }
    if (rep.skipped == rep.samples) rep.min_ratio2 = 0.0;
    return rep;
}

LemmaA2Report check_lemma_A2(double p, double R, std::size_t samples, std::uint64_t seed, int n) {
    if (!(p > 2.0)) throw InvalidArgument("check_lemma_A2: p must exceed 2");
    if (samples < 1) throw InvalidArgument("check_lemma_A2: samples must be >= 1");
    LemmaA2Report rep;
    rep.p = p;
    rep.R = R;
    rep.n = n;
    rep.samples = samples;
    rep.C = p >= 3.0 ? 2.0 * (p - 2.0) : 1.0;
    rep.mu1 = p >= 3.0 ? p - 3.0 : 0.0;
    const double expo = std::min(p - 2.0, 1.0);
    for (const SamplePair& s : sample_pairs(seed, n, R, samples)) {
        const double d = dist(s.xi, s.zeta);
        if (d == 0.0) {
            ++rep.skipped;
            continue;
        }
        const double a = std::sqrt(norm2(s.xi));
        const double b = std::sqrt(norm2(s.zeta));
        const double lhs = std::abs(std::pow(a, p - 2.0) - std::pow(b, p - 2.0));
        const double rhs = rep.C * std::pow(R, rep.mu1) * std::pow(d, expo);
        rep.max_ratio = std::max(rep.max_ratio, lhs / rhs);
        if (lhs > rhs * (1.0 + kIneqSlack)) ++rep.violations;
    }
    return rep;
}

cplx trace_AB(std::span<const cplx> xi, std::span<const cplx> zeta, std::span<const cplx> H, double p) {
    const std::size_t n = xi.size();
    if (zeta.size() != n || H.size() != n * n) throw InvalidArgument("trace_AB: dimension mismatch");
    if (!(p > 2.0)) throw InvalidArgument("trace_AB: p must exceed 2");
    double hn = 0.0;
    for (const cplx& v : H) hn = std::max(hn, std::abs(v));
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = j + 1; k < n; ++k)
            if (std::abs(H[j * n + k] - H[k * n + j]) > 1e-14 * hn) throw NonSymmetricH();

    const double na = norm2(xi), nb = norm2(zeta);
    const double wa = na == 0.0 ? 0.0 : std::pow(na, 0.5 * (p - 4.0));
    const double wb = nb == 0.0 ? 0.0 : std::pow(nb, 0.5 * (p - 4.0));
    cplx acc = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) {
            const cplx A = wa * xi[j] * std::conj(xi[k]) - wb * zeta[j] * std::conj(zeta[k]);
            const cplx B = wa * xi[j] * xi[k] - wb * zeta[j] * zeta[k];
            const cplx h = H[k * n + j];
            acc += A * h + B * std::conj(h);
        }
    return acc;
}

TraceABReport check_trace_AB(double p, double R, std::size_t samples, std::uint64_t seed, int n) {
    if (!(p > 2.0)) throw InvalidArgument("check_trace_AB: p must exceed 2");
    TraceABReport rep;
    rep.p = p;
    rep.R = R;
    rep.n = n;
    rep.samples = samples;
    rep.mu2 = 0.75 * (p - 2.0);
    const double expo = 0.25 * std::min(p - 2.0, 1.0);
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    for (const SamplePair& s : sample_pairs(seed, n, R, samples)) {
        const auto H = random_symmetric(rng, n);
        const double d = dist(s.xi, s.zeta);
        if (d == 0.0) {
            ++rep.skipped;
            continue;
        }
        const double hf = std::sqrt(norm2(H));
        const double r = std::abs(trace_AB(s.xi, s.zeta, H, p)) / (std::pow(R, rep.mu2) * hf * std::pow(d, expo));
        rep.max_ratio = std::max(rep.max_ratio, r);
    }
    return rep;
}

RateFit trace_AB_rate(double p, std::size_t cases, std::uint64_t seed, int n) {
    if (!(p > 2.0)) throw InvalidArgument("trace_AB_rate: p must exceed 2");
    RateFit fit;
    fit.expected = 0.25 * std::min(p - 2.0, 1.0);
    fit.min_slope = std::numeric_limits<double>::infinity();
    Rng rng(seed);
    double sum = 0.0;
    for (std::size_t c = 0; c < cases; ++c) {
        const CVecN xi = in_ball(rng, n, 1.0);
        CVecN d = gaussian_vec(rng, n);
        const double dn = std::sqrt(norm2(d));
        for (auto& v : d) v /= dn;
        const auto H = random_symmetric(rng, n);
        double mx = 0.0, my = 0.0, sxx = 0.0, sxy = 0.0;
        std::vector<double> lx, ly;
        for (int k = 4; k <= 20; ++k) {
            const double t = std::ldexp(1.0, -k);
            CVecN z = xi;
            for (std::size_t i = 0; i < z.size(); ++i) z[i] += t * d[i];
            const double v = std::abs(trace_AB(xi, z, H, p));
            if (v == 0.0) continue;
            lx.push_back(std::log(t));
            ly.push_back(std::log(v));
        }
        if (lx.size() < 3) continue;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            mx += lx[i];
            my += ly[i];
        }
        mx /= static_cast<double>(lx.size());
        my /= static_cast<double>(lx.size());
        for (std::size_t i = 0; i < lx.size(); ++i) {
            sxx += (lx[i] - mx) * (lx[i] - mx);
            sxy += (lx[i] - mx) * (ly[i] - my);
        }
        const double slope = sxy / sxx;
        fit.min_slope = std::min(fit.min_slope, slope);
        sum += slope;
        ++fit.cases;
    }
    fit.mean_slope = fit.cases ? sum / static_cast<double>(fit.cases) : 0.0;
    if (fit.cases == 0) fit.min_slope = 0.0;
    return fit;
}

std::optional<Baseline> reference_baseline(double p) {
    static const Baseline table[] = {
        {1.5, 1.4142135623730894, 0.70758427316625261, 1.4142135623730883, 0.0},
        {2.5, 1.0604225827366298, 0.70710677032645031, 1.060421747867405, 2.136898053460611},
        {3.0, 0.99999998428132475, 0.50000000000000833, 0.99999998107350341, 1.9763321649756873},
        {4.7, 0.99988454902841539, 0.15389305166812453, 0.99988454808579363, 1.7425296182011725},
    };
    for (const Baseline& b : table)
        if (b.p == p) return b;
    return std::nullopt;
}

bool within_baseline(const LemmaA1Report& r, const Baseline& b) {
    return r.max_ratio1 <= 1.01 * b.max_ratio1 && r.max_ratio2 <= 1.01 * b.max_ratio2 &&
           r.min_ratio2 >= b.min_ratio2 / 1.01;
}

bool within_baseline(const TraceABReport& r, const Baseline& b) { return r.max_ratio <= 1.01 * b.max_trace_ratio; }

}  // namespace pqi
