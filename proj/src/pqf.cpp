#include "pqi/pqf.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "pqi/errors.hpp"

namespace pqi {

namespace {

void put_double(std::string& out, double v) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

double get_double(const std::string& in, std::size_t pos) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + b])) << (8 * b);
    return std::bit_cast<double>(bits);
}

std::string header(const Grid& g, const char* kind) {
    std::ostringstream os;
    os << "PQF1 " << g.n() << ' ' << std::setprecision(17) << g.length() << ' ' << kind << '\n';
    return os.str();
}

void append_block(std::string& out, const ScalarField& u) {
    for (const auto& z : u.values()) {
        put_double(out, z.real());
        put_double(out, z.imag());
    }
}

ScalarField read_block(const std::string& in, std::size_t pos, const Grid& g) {
    std::vector<cplx> v(g.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = {get_double(in, pos + 16 * i), get_double(in, pos + 16 * i + 8)};
    return ScalarField(g, std::move(v));
}

}  // namespace

std::string encode_pqf(const ScalarField& u) {
    std::string out = header(u.grid(), "scalar");
    out.reserve(out.size() + 16 * u.size());
    append_block(out, u);
    return out;
}

std::string encode_pqf(const VectorField& v) {
    std::string out = header(v.grid(), "vector");
    for (int d = 0; d < 3; ++d) append_block(out, v[d]);
    return out;
}

std::variant<ScalarField, VectorField> decode_pqf(const std::string& bytes) {
    const auto eol = bytes.find('\n');
    if (eol == std::string::npos) throw InvalidArgument("PQF1: missing header line");
    std::istringstream hs(bytes.substr(0, eol));
    std::string magic, kind;
    int n = 0;
    double L = 0.0;
    if (!(hs >> magic >> n >> L >> kind) || magic != "PQF1")
        throw InvalidArgument("PQF1: malformed header");
    const Grid g(n, L);
    const std::size_t blocks = kind == "scalar" ? 1 : kind == "vector" ? 3 : 0;
    if (blocks == 0) throw InvalidArgument("PQF1: unknown kind '" + kind + "'");
    const std::size_t pos = eol + 1;
    if (bytes.size() != pos + blocks * 16 * g.size()) throw InvalidArgument("PQF1: payload size mismatch");
    if (blocks == 1) return read_block(bytes, pos, g);
    return VectorField(read_block(bytes, pos, g), read_block(bytes, pos + 16 * g.size(), g),
                       read_block(bytes, pos + 32 * g.size(), g));
}

void write_pqf(const std::filesystem::path& path, const ScalarField& u) {
    write_file_atomic(path, encode_pqf(u));
}

void write_pqf(const std::filesystem::path& path, const VectorField& v) {
    write_file_atomic(path, encode_pqf(v));
}

std::variant<ScalarField, VectorField> read_pqf(const std::filesystem::path& path) {
    return decode_pqf(read_file(path));
}

ScalarField read_scalar_pqf(const std::filesystem::path& path) {
    auto f = read_pqf(path);
    if (!std::holds_alternative<ScalarField>(f))
        throw InvalidArgument("PQF1: expected a scalar field in " + path.string());
    return std::get<ScalarField>(std::move(f));
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw InvalidArgument("cannot open " + tmp.string() + " for writing");
        os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!os) throw InvalidArgument("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InvalidArgument("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace pqi
