#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pqi {

enum class ReconMode { oracle, boundary };
std::string to_string(ReconMode m);
ReconMode parse_mode(const std::string& s);

/// Flat key=value run configuration. Frequencies (cgo.s_list, recon.cutoff)
/// are in units of 2 pi / L.
///
///   grid.N = 32            grid.L = 1
///   phantom.name = P1      p = 3          (p: overrides the phantom exponent)
///   sweep.eps = 0.0625, 0.03125, ...      (empty: regime default)
///   cgo.s_list = 4, 8      recon.cutoff = 8
///   mode = oracle          seed = 1
struct RunConfig {
    int grid_n = 32;
    double grid_l = 1.0;
    std::string phantom = "P1";
    double p = 0.0;  // 0: phantom default
    std::vector<double> sweep_eps;
    std::vector<double> s_list{4.0, 8.0};
    double cutoff = 8.0;
    ReconMode mode = ReconMode::oracle;
    std::uint64_t seed = 1;

    /// Throws InvalidArgument on out-of-range values.
    void validate() const;
    /// Canonical key=value text; parse_config(c.to_text()) == c.
    std::string to_text() const;
    std::map<std::string, std::string> to_map() const;
    bool operator==(const RunConfig&) const = default;
};

/// '#' starts a comment; blank lines are skipped. Unknown or repeated keys
/// and malformed values throw InvalidArgument.
RunConfig parse_config(const std::string& text);
/// InvalidArgument if the file cannot be read.
RunConfig load_config(const std::string& path);
/// Applies PQI_SEED from the environment when set.
void apply_env(RunConfig& c);

}  // namespace pqi
