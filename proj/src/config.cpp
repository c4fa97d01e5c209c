#include "pqi/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "pqi/errors.hpp"
#include "pqi/grid.hpp"
#include "pqi/phantom.hpp"

namespace pqi {

std::string to_string(ReconMode m) { return m == ReconMode::oracle ? "oracle" : "boundary"; }

ReconMode parse_mode(const std::string& s) {
    if (s == "oracle") return ReconMode::oracle;
    if (s == "boundary") return ReconMode::boundary;
    throw InvalidArgument("mode must be oracle or boundary, got '" + s + "'");
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out))
        throw InvalidArgument("config: " + key + ": not a number: '" + v + "'");
    return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
        throw InvalidArgument("config: " + key + ": not a non-negative integer: '" + v + "'");
    return out;
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw InvalidArgument("config: " + key + ": empty list item");
        out.push_back(parse_double(key, item));
    }
    return out;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::string fmt_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt(v[i]);
    return out;
}

}  // namespace

void RunConfig::validate() const {
    if (grid_n < 8 || !is_power_of_two(grid_n)) throw InvalidArgument("config: grid.N must be a power of two >= 8");
    if (!(grid_l > 0.0)) throw InvalidArgument("config: grid.L must be positive");
    bool known = false;
    for (const auto& n : phantom_names()) known = known || n == phantom;
    if (!known) throw UnknownPhantom(phantom);
    if (p != 0.0 && (!(p > 1.0) || p == 2.0)) throw InvalidArgument("config: p must lie in (1, inf) \\ {2}");
    for (double e : sweep_eps)
        if (!(e > 0.0 && e < 1.0)) throw InvalidArgument("config: sweep.eps values must lie in (0, 1)");
    if (!sweep_eps.empty() && sweep_eps.size() < 3) throw InvalidArgument("config: sweep.eps needs at least 3 values");
    if (s_list.empty()) throw InvalidArgument("config: cgo.s_list is empty");
    for (double s : s_list)
        if (!(s > 0.0)) throw InvalidArgument("config: cgo.s_list values must be positive");
    if (!(cutoff > 0.0)) throw InvalidArgument("config: recon.cutoff must be positive");
}

std::map<std::string, std::string> RunConfig::to_map() const {
    return {{"grid.N", std::to_string(grid_n)},
            {"grid.L", fmt(grid_l)},
            {"phantom.name", phantom},
            {"p", fmt(p)},
            {"sweep.eps", fmt_list(sweep_eps)},
            {"cgo.s_list", fmt_list(s_list)},
            {"recon.cutoff", fmt(cutoff)},
            {"mode", to_string(mode)},
            {"seed", std::to_string(seed)}};
}

std::string RunConfig::to_text() const {
    std::string out;
    for (const auto& [k, v] : to_map()) out += k + " = " + v + "\n";
    return out;
}

RunConfig parse_config(const std::string& text) {
    RunConfig c;
    std::set<std::string> seen;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidArgument("config: line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (!seen.insert(key).second) throw InvalidArgument("config: repeated key '" + key + "'");
        if (key == "grid.N") {
            const auto n = parse_uint(key, val);
            if (n > 4096) throw InvalidArgument("config: grid.N too large");
            c.grid_n = static_cast<int>(n);
        } else if (key == "grid.L") {
            c.grid_l = parse_double(key, val);
        } else if (key == "phantom.name") {
            c.phantom = val;
        } else if (key == "p") {
            c.p = parse_double(key, val);
        } else if (key == "sweep.eps") {
            c.sweep_eps = val.empty() ? std::vector<double>{} : parse_list(key, val);
        } else if (key == "cgo.s_list") {
            c.s_list = parse_list(key, val);
        } else if (key == "recon.cutoff") {
            c.cutoff = parse_double(key, val);
        } else if (key == "mode") {
            c.mode = parse_mode(val);
        } else if (key == "seed") {
            c.seed = parse_uint(key, val);
        } else {
            throw InvalidArgument("config: unknown key '" + key + "'");
        }
    }
    c.validate();
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("config: cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void apply_env(RunConfig& c) {
    if (const char* s = std::getenv("PQI_SEED")) c.seed = parse_uint("PQI_SEED", trim(s));
}

}  // namespace pqi
