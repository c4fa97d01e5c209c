#include "pqi/asympt.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "pqi/dnmap.hpp"
#include "pqi/errors.hpp"

namespace pqi {

std::string to_string(Regime r) { return r == Regime::super ? "super" : "sub"; }

void EpsSweep::validate() const {
    if (epsilons.size() != pairings.size()) throw InvalidArgument("sweep: size mismatch");
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        if (!(epsilons[i] >= 1e-4 && epsilons[i] < 1.0)) throw InvalidArgument("sweep: eps must lie in [1e-4, 1)");
        if (i > 0 && !(epsilons[i] < epsilons[i - 1])) throw InvalidArgument("sweep: eps must decrease strictly");
        if (!std::isfinite(pairings[i].real()) || !std::isfinite(pairings[i].imag()))
            throw InvalidArgument("sweep: non-finite pairing");
    }
}

std::vector<double> default_epsilons(Regime r) {
    std::vector<double> e;
    const int lo = r == Regime::super ? 4 : 1;
    const int hi = r == Regime::super ? 10 : 5;
    for (int k = lo; k <= hi; ++k) e.push_back(std::ldexp(1.0, -k));
    return e;
}

std::vector<EpsSweep> sweep_many(const ForwardOperator& op, const BoundaryTrace& f,
                                 std::span<const ScalarField> ws, const std::vector<double>& epsilons,
                                 Regime regime, double tol) {
    if (!(tol > 0.0)) throw InvalidArgument("sweep: tol must be positive");
    std::vector<EpsSweep> out(ws.size());
    for (auto& s : out) {
        s.epsilons = epsilons;
        s.regime = regime;
        s.pairings.assign(epsilons.size(), cplx{});
    }
    EpsSweep probe{epsilons, std::vector<cplx>(epsilons.size()), regime};
    probe.validate();
    const double fnorm = f.norm(op.coefficients().p);
    double fmax = 0.0;
    for (cplx v : f.values()) fmax = std::max(fmax, std::abs(v));
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        const double t = probe.data_scale(i);
        if (t * fnorm < 1e3 * tol)
            throw InvalidArgument("sweep: data scale below the noise floor (eps * ||f|| < 1e3 tol)");
        const auto d = dn_pair_many(op, f.scaled(t), ws, tol * t * std::max(fmax, 1e-300));
        for (std::size_t j = 0; j < ws.size(); ++j) out[j].pairings[i] = d[j].value;
    }
    return out;
}

EpsSweep sweep(const ForwardOperator& op, const BoundaryTrace& f, const ScalarField& w,
               const std::vector<double>& epsilons, Regime regime, double tol) {
    return sweep_many(op, f, std::span<const ScalarField>(&w, 1), epsilons, regime, tol).front();
}

EpsSweep sweep(const Coefficients& c, const BoundaryTrace& f, const ScalarField& w,
               const std::vector<double>& epsilons, double tol) {
    return sweep(ForwardOperator(c), f, w, epsilons, c.p > 2.0 ? Regime::super : Regime::sub, tol);
}

namespace {

Extrapolated neville(std::span<const double> s, std::span<const cplx> values, int order) {
    const std::size_t n = s.size();
    if (n != values.size() || n < 2) throw InvalidArgument("richardson: need at least two samples");
    const int m = std::min<int>(order, static_cast<int>(n) - 1);
    // Neville tableau: t[i][j] interpolates points i-j..i and is evaluated at s = 0
    std::vector<std::vector<cplx>> t(n, std::vector<cplx>(m + 1));
    for (std::size_t i = 0; i < n; ++i) {
        t[i][0] = values[i];
        for (int j = 1; j <= m && j <= static_cast<int>(i); ++j) {
            const double si = s[i], sj = s[i - j];
            t[i][j] = (si * t[i - 1][j - 1] - sj * t[i][j - 1]) / (si - sj);
        }
    }
    Extrapolated out{t[n - 1][m], 0.0};
    if (n >= static_cast<std::size_t>(m) + 2) out.error = std::abs(t[n - 1][m] - t[n - 2][m]);
    else out.error = std::abs(t[n - 1][m] - t[n - 1][m - 1]);
    return out;
}

}  // namespace

Extrapolated richardson(std::span<const double> s, std::span<const cplx> values, int order, double floor) {
    const Extrapolated out = neville(s, values, order);
    if (out.error > 0.1 * std::max(std::abs(out.value), floor))
        throw IllConditionedFit("successive extrapolants disagree by more than 10%");
    return out;
}

namespace {

std::vector<double> small_param(const EpsSweep& sw, double p) {
    std::vector<double> s(sw.epsilons.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::pow(sw.data_scale(i), p - 2.0);
    return s;
}

constexpr int richardson_order = 3;

}  // namespace

Extrapolated extract_linear(const EpsSweep& sw, double p) {
    sw.validate();
    if (sw.epsilons.size() < 3) throw InvalidArgument("extract_linear: need at least 3 sweep points");
    const auto s = small_param(sw, p);
    std::vector<cplx> q(s.size());
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = sw.pairings[i] / sw.data_scale(i);
    return richardson(s, q, richardson_order);
}

Extrapolated extract_I(const EpsSweep& sw, cplx linear, double p) {
    sw.validate();
    if (sw.epsilons.size() < 3) throw InvalidArgument("extract_I: need at least 3 sweep points");
    const auto s = small_param(sw, p);
    std::vector<cplx> r(s.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double t = sw.data_scale(i);
        r[i] = (sw.pairings[i] - t * linear) / std::pow(t, p - 1.0);
    }
    // relative roundoff of the pairings, amplified by 1/s
    const double floor = 1e-10 * std::abs(linear) / *std::min_element(s.begin(), s.end());
    return richardson(s, r, richardson_order - 1, floor);
}

SweepFit loglog_fit(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw InvalidArgument("loglog_fit: need at least two points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw IllConditionedFit("loglog_fit: non-positive sample");
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(x[i]) - mx, dy = std::log(y[i]) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    SweepFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
    return f;
}

SweepFit leading_exponent(const EpsSweep& sw) {
    std::vector<double> y(sw.pairings.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::abs(sw.pairings[i]);
    return loglog_fit(sw.epsilons, y);
}

SweepFit second_exponent(const EpsSweep& sw, cplx linear) {
    std::vector<double> y(sw.pairings.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::abs(sw.pairings[i] - sw.data_scale(i) * linear);
    return loglog_fit(sw.epsilons, y);
}

SweepFit remainder_exponent(const EpsSweep& sw, cplx linear, cplx I, double p, double noise_floor) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < sw.pairings.size(); ++i) {
        const double t = sw.data_scale(i);
        const double rem = std::abs(sw.pairings[i] - t * linear - std::pow(t, p - 1.0) * I);
        if (rem > noise_floor * std::abs(sw.pairings[i])) {
            x.push_back(sw.epsilons[i]);
            y.push_back(rem);
        }
    }
    if (x.size() < 3) throw IllConditionedFit("remainder below the noise floor at too many sweep points");
    return loglog_fit(x, y);
}

PairingOracle make_oracle(const ForwardOperator& op, const ScalarField& w, double tol) {
    return [&op, w, tol](const BoundaryTrace& data) {
        double m = 0.0;
        for (cplx v : data.values()) m = std::max(m, std::abs(v));
        return dn_pair(op, data, w, tol * std::max(m, 1e-300)).value;
    };
}

PEstimate estimate_p(const PairingOracle& oracle, const BoundaryTrace& f, std::vector<double> epsilons) {
    // Regime: the linear end is where pairing / scale flattens out.
    auto ratio = [&](double t) { return oracle(f.scaled(t)) / t; };
    const cplx qs0 = ratio(0x1.0p-6), qs1 = ratio(0x1.0p-5);
    const cplx ql0 = ratio(0x1.0p5), ql1 = ratio(0x1.0p4);
    const double flat_small = std::abs(qs0 - qs1) / std::abs(qs0);
    const double flat_large = std::abs(ql0 - ql1) / std::abs(ql0);

    PEstimate est;
    est.regime = flat_small <= flat_large ? Regime::super : Regime::sub;
    if (epsilons.empty()) epsilons = default_epsilons(est.regime);
    EpsSweep& sw = est.sweep;
    sw.regime = est.regime;
    sw.epsilons = epsilons;
    for (std::size_t i = 0; i < epsilons.size(); ++i) sw.pairings.push_back(oracle(f.scaled(sw.data_scale(i))));
    sw.validate();
    const std::size_t n = epsilons.size();
    if (n < 4) throw InvalidArgument("estimate_p: need at least 4 sweep points");

    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = sw.data_scale(i);

    // Degenerate medium: pairing / scale constant to roundoff.
    double spread = 0.0;
    for (std::size_t i = 1; i < n; ++i)
        spread = std::max(spread, std::abs(sw.pairings[i] / t[i] - sw.pairings[0] / t[0]));
    if (spread <= 1e-10 * std::abs(sw.pairings[0] / t[0]))
        throw IllConditionedFit("no second-order term: pairing is linear in the data");

    // Variable projection: for each trial p, least squares of pairing/t on {1, s, s^2}
    // with s = t^(p-2); the medium's p minimizes the misfit.
    std::vector<cplx> q(n);
    for (std::size_t i = 0; i < n; ++i) q[i] = sw.pairings[i] / t[i];
    auto misfit = [&](double pp, cplx* lin) {
        Eigen::MatrixXd B(n, 3);
        Eigen::MatrixXd rhs(n, 2);
        for (std::size_t i = 0; i < n; ++i) {
            const double si = std::pow(t[i], pp - 2.0);
            B(i, 0) = 1.0;
            B(i, 1) = si;
            B(i, 2) = si * si;
            rhs(i, 0) = q[i].real();
            rhs(i, 1) = q[i].imag();
        }
        const Eigen::MatrixXd coef = B.colPivHouseholderQr().solve(rhs);
        if (lin) *lin = {coef(0, 0), coef(0, 1)};
        return (B * coef - rhs).norm();
    };
    const double lo = est.regime == Regime::super ? 2.02 : 1.02;
    const double hi = est.regime == Regime::super ? 8.0 : 1.98;
    const int grid_pts = 300;
    double best = lo, best_val = misfit(lo, nullptr);
    for (int k = 1; k <= grid_pts; ++k) {
        const double pp = lo + (hi - lo) * k / grid_pts;
        const double v = misfit(pp, nullptr);
        if (v < best_val) {
            best_val = v;
            best = pp;
        }
    }
    double a = std::max(lo, best - (hi - lo) / grid_pts), b = std::min(hi, best + (hi - lo) / grid_pts);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 100 && b - a > 1e-12; ++it) {
        est.iterations = it + 1;
        const double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
        if (misfit(c1, nullptr) < misfit(c2, nullptr)) b = c2;
        else a = c1;
    }
    est.p_model = 0.5 * (a + b);
    cplx A;
    misfit(est.p_model, &A);

    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = std::abs(sw.pairings[i] - t[i] * A);
        if (!(d[i] > 0.0)) throw IllConditionedFit("second-order term vanishes");
    }
    est.fit = loglog_fit(sw.epsilons, d);
    const double p = est.regime == Regime::super ? 1.0 + est.fit.slope : 1.0 - est.fit.slope;
    est.p = p;
    est.linear = A;
    if (est.fit.r_squared < 0.99) throw IllConditionedFit("log-log fit r^2 below 0.99");
    return est;
}

}  // namespace pqi
