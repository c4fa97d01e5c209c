#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pqi/asympt.hpp"
#include "pqi/cgo.hpp"
#include "pqi/config.hpp"
#include "pqi/dnmap.hpp"
#include "pqi/errors.hpp"
#include "pqi/forward.hpp"
#include "pqi/phantom.hpp"
#include "pqi/polarize.hpp"
#include "pqi/pqf.hpp"
#include "pqi/recon.hpp"
#include "pqi/vecineq.hpp"

using namespace pqi;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kSchemaVersion = 1;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shortest text that reads back to the same double.
std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json cjson(cplx z) { return json::array({z.real(), z.imag()}); }

json vjson(const CVec3& v) { return json::array({cjson(v[0]), cjson(v[1]), cjson(v[2])}); }

json tagged(json j) {
    j["schema_version"] = kSchemaVersion;
    return j;
}

void emit_json(const json& j, const std::string& path) {
    const std::string text = j.dump(2) + "\n";
    if (path.empty() || path == "-")
        std::cout << text;
    else
        write_file_atomic(path, text);
}

std::uint64_t env_seed(std::uint64_t seed) {
    if (const char* s = std::getenv("PQI_SEED")) {
        RunConfig c;
        c.seed = seed;
        apply_env(c);
        return c.seed;
    }
    return seed;
}

// Options shared by the subcommands that need a medium.
struct Medium {
    std::string phantom = "P1";
    std::uint64_t seed = 1;
    int n = 32;
    double length = 1.0;
    double p = 0.0;
    std::string sigma_path, a_path;

    void add(CLI::App* app) {
        app->add_option("--phantom", phantom, "phantom name (null, P1, P2, P3-lowp)");
        app->add_option("--seed", seed, "phantom seed (PQI_SEED overrides)");
        app->add_option("-N,--grid-n", n, "grid points per axis");
        app->add_option("-L,--grid-l", length, "box length");
        app->add_option("--p", p, "exponent (default: the phantom's)");
        app->add_option("--sigma", sigma_path, "sigma as PQF1 (with --a, replaces --phantom)");
        app->add_option("--a", a_path, "a as PQF1");
    }

    Coefficients build() const {
        Coefficients c = sigma_path.empty() && a_path.empty() ? make_phantom(phantom, env_seed(seed), Grid(n, length))
                                                              : from_files();
        if (p > 0) c.p = p;
        c.check_solvable();
        return c;
    }

    Coefficients from_files() const {
        if (sigma_path.empty() || a_path.empty()) throw UsageError("--sigma and --a go together");
        Coefficients c{read_scalar_pqf(sigma_path), read_scalar_pqf(a_path)};
        if (c.sigma.grid().n() != c.a.grid().n() || c.sigma.grid().length() != c.a.grid().length())
            throw InvalidArgument("sigma and a are on different grids");
        return c;
    }
};

// "x1", "x2", "x3" or a PQF1 file whose boundary-layer values are the trace.
BoundaryTrace load_trace(const std::string& name, const Grid& g) {
    if (name.size() == 2 && name[0] == 'x' && name[1] >= '1' && name[1] <= '3') {
        const int d = name[1] - '1';
        return BoundaryTrace::from_function(g, [d](const Vec3& x) { return cplx(x[d]); });
    }
    const ScalarField f = read_scalar_pqf(name);
    if (f.grid().n() != g.n() || f.grid().length() != g.length())
        throw InvalidArgument("trace '" + name + "' is on a different grid");
    return BoundaryTrace::of(f);
}

// Builtin names give the sigma-harmonic extension; files are used as given.
ScalarField load_test_field(const std::string& name, const LinearOperator& lin) {
    if (name.size() == 2 && name[0] == 'x') return lin.solve_dirichlet(load_trace(name, lin.grid()), nullptr);
    const ScalarField w = read_scalar_pqf(name);
    if (w.grid().n() != lin.grid().n() || w.grid().length() != lin.grid().length())
        throw InvalidArgument("test field '" + name + "' is on a different grid");
    return w;
}

json report_json(const SolveReport& r) {
    json j{{"iterations", r.iterations},
           {"final_energy", r.final_energy},
           {"weak_residual", r.weak_residual},
           {"converged", r.converged},
           {"energy_history", r.energy_history}};
    j["contraction_ratio"] = r.contraction_ratio ? json(*r.contraction_ratio) : json(nullptr);
    return j;
}

Vec3 lattice_xi(const std::vector<double>& n, const Grid& g) {
    if (n.size() != 3) throw UsageError("--xi takes three lattice indices");
    const double k0 = 2 * M_PI / g.length();
    return {k0 * n[0], k0 * n[1], k0 * n[2]};
}

const char* kPlotScript = R"(import sys, csv
import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_pqf(path):
    with open(path, "rb") as f:
        head = f.readline().split()
        n, kind = int(head[1]), head[3].decode()
        data = np.frombuffer(f.read(), dtype="<f8")
    blocks = 1 if kind == "scalar" else 3
    z = data[0::2] + 1j * data[1::2]
    return z.reshape(blocks, n, n, n)[0]  # (k, j, i)


def main(out):
    a_hat = read_pqf(out + "/a_hat.pqf").real
    a_band = read_pqf(out + "/a_band.pqf").real
    n = a_hat.shape[0]
    fig, ax = plt.subplots(1, 3, figsize=(12, 4))
    for axis, f, title in zip(ax, (a_band, a_hat, a_hat - a_band), ("band-limited a", "a_hat", "difference")):
        im = axis.imshow(f[n // 2], origin="lower")
        axis.set_title(title)
        fig.colorbar(im, ax=axis)
    fig.savefig(out + "/slices.png", dpi=120)

    rows = list(csv.DictReader(open(out + "/khat.csv")))
    k = np.array([np.hypot(np.hypot(float(r["xi_x"]), float(r["xi_y"])), float(r["xi_z"])) for r in rows])
    v = np.array([abs(complex(float(r["re"]), float(r["im"]))) for r in rows])
    fig, axis = plt.subplots()
    axis.loglog(k, v, ".")
    axis.set_xlabel("|xi|")
    axis.set_ylabel("|khat|")
    fig.savefig(out + "/khat.png", dpi=120)


main(sys.argv[1] if len(sys.argv) > 1 else ".")
)";

// ---- subcommands ----

struct ForwardArgs {
    Medium medium;
    std::string trace = "x1";
    double scale = 1.0;
    double tol = 1e-10;
    bool strong = false;
    std::string out, report;
};

int run_forward(const ForwardArgs& a) {
    const Coefficients c = a.medium.build();
    const ForwardOperator op(c);
    const BoundaryTrace f = load_trace(a.trace, c.grid()).scaled(a.scale);
    WeakSolveOptions opt;
    opt.tol = a.tol;
    const Solution s = a.strong ? op.solve_strong(f, nullptr, a.tol) : op.solve_weak(f, nullptr, opt);
    if (!a.out.empty()) write_pqf(a.out, s.u);
    emit_json(tagged({{"solver", a.strong ? "strong" : "weak"}, {"p", c.p}, {"report", report_json(s.report)}}),
              a.report);
    return 0;
}

struct DnArgs {
    Medium medium;
    std::vector<std::string> fs{"x1"}, ws{"x1"};
    double scale = 1.0;
    double tol = 1e-10;
    std::string out;
};

int run_dn(const DnArgs& a) {
    const Coefficients c = a.medium.build();
    const ForwardOperator op(c);
    std::vector<ScalarField> ws;
    for (const auto& w : a.ws) ws.push_back(load_test_field(w, op.linear()));
    std::ostringstream csv;
    csv << "f_id,w_id,re,im\n";
    for (std::size_t i = 0; i < a.fs.size(); ++i) {
        const BoundaryTrace f = load_trace(a.fs[i], c.grid()).scaled(a.scale);
        const auto pairs = dn_pair_many(op, f, ws, a.tol);
        for (std::size_t j = 0; j < pairs.size(); ++j)
            csv << i << ',' << j << ',' << num(pairs[j].value.real()) << ',' << num(pairs[j].value.imag()) << '\n';
    }
    if (a.out.empty() || a.out == "-")
        std::cout << csv.str();
    else
        write_file_atomic(a.out, csv.str());
    return 0;
}

struct AsymptArgs {
    Medium medium;
    std::string trace = "x1", w = "x1";
    std::vector<double> eps;
    std::string csv, report;
};

void write_sweep_csv(const EpsSweep& sw, const std::string& path) {
    std::ostringstream os;
    os << "epsilon,re,im\n";
    for (std::size_t i = 0; i < sw.epsilons.size(); ++i)
        os << num(sw.epsilons[i]) << ',' << num(sw.pairings[i].real()) << ',' << num(sw.pairings[i].imag()) << '\n';
    if (path.empty() || path == "-")
        std::cout << os.str();
    else
        write_file_atomic(path, os.str());
}

int run_asympt(const AsymptArgs& a) {
    const Coefficients c = a.medium.build();
    const ForwardOperator op(c);
    const BoundaryTrace f = load_trace(a.trace, c.grid());
    const ScalarField w = load_test_field(a.w, op.linear());
    PEstimate est;
    try {
        est = estimate_p(make_oracle(op, w), f, a.eps);
    } catch (const NumericalError&) {
        // keep the raw sweep for inspection, then report the failure
        const Regime r = c.p > 2 ? Regime::super : Regime::sub;
        write_sweep_csv(sweep(op, f, w, a.eps.empty() ? default_epsilons(r) : a.eps, r), a.csv);
        throw;
    }
    write_sweep_csv(est.sweep, a.csv);
    const Extrapolated I = extract_I(est.sweep, est.linear, est.p);
    const SweepFit lead = leading_exponent(est.sweep);
    const SweepFit second = second_exponent(est.sweep, est.linear);
    const SweepFit rem = remainder_exponent(est.sweep, est.linear, I.value, est.p);
    emit_json(tagged({{"regime", to_string(est.regime)},
                      {"linear", cjson(est.linear)},
                      {"I", cjson(I.value)},
                      {"I_error", I.error},
                      {"p_estimate", est.p},
                      {"p_model", est.p_model},
                      {"slopes", {{"leading", lead.slope}, {"second", second.slope}, {"remainder", rem.slope}}},
                      {"r_squared", {{"leading", lead.r_squared}, {"second", second.r_squared}, {"remainder", rem.r_squared}}}}),
              a.report);
    return 0;
}

struct PolarizeArgs {
    Medium medium;
    std::vector<double> xi{1, 0, 0};
    double s = 1.0;
    std::string mode = "oracle";
    double step = 0.0;
    std::vector<double> eps;
    std::string report;
};

int run_polarize(const PolarizeArgs& a) {
    const Coefficients c = a.medium.build();
    const ReconMode mode = parse_mode(a.mode);
    const ForwardOperator op(c);
    const Grid& g = c.grid();
    const Vec3 xi = lattice_xi(a.xi, g);
    const CgoParams par = make_cgo_params(xi, a.s * 2 * M_PI / g.length());
    CgoBuilder cgo(c.sigma);
    cgo.set_diagnostics(false);
    // discrete sigma-harmonic triple: u1 plus extensions of the CGO traces
    HarmonicTriple t{default_u1(op.linear()),
                     op.linear().solve_dirichlet(BoundaryTrace::of(cgo.solve(par.zeta2).u), nullptr),
                     op.linear().solve_dirichlet(BoundaryTrace::of(cgo.solve(par.zeta3).u), nullptr)};
    const Quadrature q = Quadrature::q1(c);
    const TripleGradients tg = TripleGradients::of(q, t);
    const double step = a.step > 0 ? a.step : default_step(tg);
    const PolarProbe probe =
        mode == ReconMode::oracle ? oracle_probe(q, tg) : boundary_probe(op, t, a.eps);
    const Polarization pz = polarize(probe, c.p, step, true);
    emit_json(tagged({{"mode", to_string(mode)},
                      {"xi", xi},
                      {"s", par.s},
                      {"I3", cjson(pz.I3)},
                      {"J3", cjson(pz.J3)},
                      {"K", cjson(pz.K)},
                      {"oracle_K", cjson(K_direct(q, tg))},
                      {"step", pz.step},
                      {"error_estimate", pz.error_estimate}}),
              a.report);
    return 0;
}

struct CgoArgs {
    Medium medium;
    std::vector<double> xi{1, 0, 0};
    double s = 4.0;
    int which = 2;
    double tol = 1e-8;
    bool harmonic = false;
    std::string u_out, r_out, report;
};

int run_cgo(const CgoArgs& a) {
    const Coefficients c = a.medium.build();
    const Grid& g = c.grid();
    const CgoParams par = make_cgo_params(lattice_xi(a.xi, g), a.s * 2 * M_PI / g.length());
    const CVec3 zeta = a.which == 2 ? par.zeta2 : par.zeta3;
    const CgoSolution sol =
        cgo_solution(c.sigma, zeta, a.tol, a.harmonic ? CgoEquation::harmonic : CgoEquation::stated);
    double r2 = 0;
    for (auto v : sol.r.values()) r2 += std::norm(v);
    if (!a.u_out.empty()) write_pqf(a.u_out, sol.u);
    if (!a.r_out.empty()) write_pqf(a.r_out, sol.r);
    emit_json(tagged({{"zeta", vjson(zeta)},
                      {"tau", par.tau},
                      {"s", par.s},
                      {"residual", sol.residual},
                      {"r_norm", std::sqrt(r2 * g.cell_volume())},
                      {"iterations", sol.iterations},
                      {"excluded_modes", sol.excluded_modes},
                      {"excluded_mass", sol.excluded_mass},
                      {"harmonic_residual", sol.harmonic_residual}}),
              a.report);
    return 0;
}

struct ReconArgs {
    std::string config;
    std::string out_dir = ".";
    bool plot = false;
    int threads = 1;
};

int run_reconstruct(const ReconArgs& a) {
    if (!fs::exists(a.config)) throw UsageError("config file not found: " + a.config);
    RunConfig cfg = load_config(a.config);
    apply_env(cfg);
    if (a.threads < 1) throw UsageError("--threads must be >= 1");
    fs::create_directories(a.out_dir);
    const fs::path dir(a.out_dir);

    const PipelineResult r = run_pipeline(cfg, a.threads);
    std::cerr << "reconstruct: " << r.data.xi_list.size() << " frequencies in " << r.seconds << " s\n";

    write_pqf(dir / "a_hat.pqf", r.report.a_hat);
    write_pqf(dir / "a_band.pqf", r.a_band);

    std::ostringstream csv;
    csv << "xi_x,xi_y,xi_z,re,im,extrapolation_error,failed\n";
    for (std::size_t i = 0; i < r.data.xi_list.size(); ++i) {
        const auto& x = r.data.xi_list[i];
        csv << num(x[0]) << ',' << num(x[1]) << ',' << num(x[2]) << ',' << num(r.data.khat[i].real()) << ','
            << num(r.data.khat[i].imag()) << ',' << num(r.data.extrapolation_error[i]) << ','
            << (r.data.failed(i) ? 1 : 0) << '\n';
    }
    write_file_atomic(dir / "khat.csv", csv.str());

    json failures = json::array();
    for (const auto& f : r.data.failures)
        failures.push_back({{"xi", r.data.xi_list[f.index]}, {"kind", f.kind}, {"message", f.message}});
    json rep{{"config", r.config.to_map()},
             {"p_true", r.truth.p},
             {"p_used", r.p_used},
             {"cutoff", r.data.cutoff},
             {"frequencies", r.data.xi_list.size()},
             {"failures", failures},
             {"hermitian_residual", r.hermitian_residual},
             {"imag_residual", r.report.imag_residual},
             {"beta_iterations", r.report.beta_iterations},
             {"beta_residual", r.report.beta_residual}};
    rep["p_hat"] = r.p_hat ? json(*r.p_hat) : json(nullptr);
    rep["p_error"] = r.p_error.empty() ? json(nullptr) : json(r.p_error);
    rep["rel_l2_error"] = r.report.rel_l2_error ? json(*r.report.rel_l2_error) : json(nullptr);
    emit_json(tagged(rep), (dir / "report.json").string());
    if (a.plot) write_file_atomic(dir / "plot_slices.py", kPlotScript);
    return 0;
}

struct SelftestArgs {
    std::vector<double> ps{1.5, 2.5, 3.0, 4.7};
    std::size_t samples = 100000;
    std::uint64_t seed = 1;
    int n = 3;
    double R = 1.0;
    std::string report;
};

int run_selftest(const SelftestArgs& a) {
    const std::uint64_t seed = env_seed(a.seed);
    bool pass = true;
    json items = json::array();
    for (double p : a.ps) {
        const LemmaA1Report r1 = check_lemma_A1(p, a.samples, seed, a.n, a.R);
        json item{{"p", p},
                  {"lemma_A1", {{"max_ratio1", r1.max_ratio1},
                                {"min_ratio2", r1.min_ratio2},
                                {"max_ratio2", r1.max_ratio2},
                                {"max_ratio3", r1.max_ratio3},
                                {"violations", r1.violations3},
                                {"skipped", r1.skipped},
                                {"pass", r1.ok()}}}};
        bool ok = r1.ok();
        if (p > 2) {
            const LemmaA2Report r2 = check_lemma_A2(p, a.R, a.samples, seed, a.n);
            const TraceABReport tr = check_trace_AB(p, a.R, a.samples, seed, a.n);
            item["lemma_A2"] = {{"C", r2.C}, {"mu1", r2.mu1}, {"max_ratio", r2.max_ratio},
                                {"violations", r2.violations}, {"pass", r2.ok()}};
            item["trace_AB"] = {{"mu2", tr.mu2}, {"max_ratio", tr.max_ratio}};
            ok = ok && r2.ok();
        }
        item["pass"] = ok;
        pass = pass && ok;
        items.push_back(item);
    }
    emit_json(tagged({{"suite", "vecineq"}, {"samples", a.samples}, {"seed", seed}, {"n", a.n}, {"R", a.R},
                      {"results", items}, {"pass", pass}}),
              a.report);
    return pass ? 0 : 1;
}

void print_error(const std::string& kind, const std::string& message, int code) {
    std::cerr << json{{"schema_version", kSchemaVersion},
                      {"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}}
                     .dump()
              << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pqi: forward and inverse solver for div(sigma grad u + a |grad u|^(p-2) grad u) = 0"};
    app.require_subcommand(1);
    int threads = 1;
    app.add_option("--threads", threads, "worker threads (1 is the reproducible reference)");

    ForwardArgs fa;
    auto* fwd = app.add_subcommand("forward", "solve the forward problem");
    fa.medium.add(fwd);
    fwd->add_option("--trace", fa.trace, "Dirichlet trace: x1, x2, x3 or a PQF1 file");
    fwd->add_option("--scale", fa.scale, "multiplier on the trace");
    fwd->add_option("--tol", fa.tol, "weak residual tolerance");
    fwd->add_flag("--strong", fa.strong, "fixed-point solver instead of Newton");
    fwd->add_option("-o,--out", fa.out, "solution (PQF1)");
    fwd->add_option("--report", fa.report, "solve report (JSON, default stdout)");

    DnArgs da;
    auto* dn = app.add_subcommand("dn", "DN pairings <Lambda f, w>");
    da.medium.add(dn);
    dn->add_option("--f", da.fs, "traces (x1, x2, x3 or PQF1 files)");
    dn->add_option("--w", da.ws, "test fields (builtin names are extended sigma-harmonically)");
    dn->add_option("--scale", da.scale, "multiplier on every trace");
    dn->add_option("--tol", da.tol, "weak residual tolerance");
    dn->add_option("-o,--out", da.out, "CSV output (default stdout)");

    AsymptArgs aa;
    auto* as = app.add_subcommand("asympt", "epsilon sweep, expansion fit and p estimate");
    aa.medium.add(as);
    as->add_option("--trace", aa.trace, "trace f");
    as->add_option("--w", aa.w, "test field");
    as->add_option("--eps", aa.eps, "epsilons (comma separated)")->delimiter(',');
    as->add_option("--csv", aa.csv, "sweep CSV (default stdout)");
    as->add_option("--report", aa.report, "fit report JSON (default stdout)");

    PolarizeArgs pa;
    auto* pol = app.add_subcommand("polarize", "I3, J3 and K for a CGO triple");
    pa.medium.add(pol);
    pol->add_option("--xi", pa.xi, "frequency in lattice units 2 pi/L")->delimiter(',')->expected(3);
    pol->add_option("--s", pa.s, "CGO parameter in units of 2 pi/L");
    pol->add_option("--mode", pa.mode, "oracle or boundary");
    pol->add_option("--step", pa.step, "Wirtinger step (default 1e-3 |grad u1| / |grad u2|)");
    pol->add_option("--eps", pa.eps, "boundary-mode epsilons")->delimiter(',');
    pol->add_option("--report", pa.report, "JSON output (default stdout)");

    CgoArgs ca;
    auto* cg = app.add_subcommand("cgo", "complex geometrical optics solution");
    ca.medium.add(cg);
    cg->add_option("--xi", ca.xi, "frequency in lattice units 2 pi/L")->delimiter(',')->expected(3);
    cg->add_option("--s", ca.s, "s in units of 2 pi/L");
    cg->add_option("--which", ca.which, "2 or 3 (zeta2 or zeta3)")->check(CLI::IsMember({2, 3}));
    cg->add_option("--tol", ca.tol, "Born iteration tolerance");
    cg->add_flag("--harmonic", ca.harmonic, "use the exact sigma-harmonic equation for r");
    cg->add_option("--u-out", ca.u_out, "u (PQF1)");
    cg->add_option("--r-out", ca.r_out, "r (PQF1)");
    cg->add_option("--report", ca.report, "JSON output (default stdout)");

    ReconArgs ra;
    auto* rec = app.add_subcommand("reconstruct", "reconstruct a from the configured run");
    rec->add_option("--config", ra.config, "key=value run configuration")->required();
    rec->add_option("--out-dir", ra.out_dir, "output directory");
    rec->add_flag("--plot", ra.plot, "also write plot_slices.py");

    SelftestArgs sa;
    auto* st = app.add_subcommand("selftest", "property checks");
    st->require_subcommand(1);
    auto* vi = st->add_subcommand("vecineq", "vector inequalities");
    vi->add_option("--p", sa.ps, "exponents (comma separated)")->delimiter(',');
    vi->add_option("--samples", sa.samples, "samples per check");
    vi->add_option("--seed", sa.seed, "sampling seed (PQI_SEED overrides)");
    vi->add_option("--n", sa.n, "dimension of C^n");
    vi->add_option("--R", sa.R, "radius of the sampling ball");
    vi->add_option("--report", sa.report, "JSON output (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << app.help() << '\n';
        print_error("UsageError", e.what(), 2);
        return 2;
    }

    try {
        ra.threads = threads;
        if (fwd->parsed()) return run_forward(fa);
        if (dn->parsed()) return run_dn(da);
        if (as->parsed()) return run_asympt(aa);
        if (pol->parsed()) return run_polarize(pa);
        if (cg->parsed()) return run_cgo(ca);
        if (rec->parsed()) return run_reconstruct(ra);
        if (vi->parsed()) return run_selftest(sa);
    } catch (const UsageError& e) {
        print_error("UsageError", e.what(), 2);
        return 2;
    } catch (const InvalidArgument& e) {
        print_error("InvalidArgument", e.what(), 2);
        return 2;
    } catch (const NumericalError& e) {
        print_error(e.kind(), e.what(), 3);
        return 3;
    } catch (const std::exception& e) {
        print_error("InternalError", e.what(), 4);
        return 4;
    }
    return 2;
}
