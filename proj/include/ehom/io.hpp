#ifndef EHOM_IO_HPP
#define EHOM_IO_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ehom/effective.hpp"
#include "ehom/grid.hpp"

namespace ehom {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Field serialization: header (dimension, resolution, rank) then row-major
// samples, binary or CSV.

inline void write_field_binary(const Field& f, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("io", "cannot write " + path);
    const char magic[4] = {'E', 'H', 'F', 'D'};
    out.write(magic, 4);
    const std::uint32_t header[4] = {1u, static_cast<std::uint32_t>(f.grid().dim()),
                                     static_cast<std::uint32_t>(f.grid().n()),
                                     static_cast<std::uint32_t>(f.rank())};
    out.write(reinterpret_cast<const char*>(header), sizeof header);
    const double scale = f.grid().scale();
    out.write(reinterpret_cast<const char*>(&scale), sizeof scale);
    out.write(reinterpret_cast<const char*>(f.raw().data()),
              static_cast<std::streamsize>(f.raw().size() * sizeof(double)));
}

inline Field read_field_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("io", "cannot read " + path);
    char magic[4];
    in.read(magic, 4);
    if (std::memcmp(magic, "EHFD", 4) != 0)
        throw ConfigError("io", path + " is not a field dump");
    std::uint32_t header[4];
    in.read(reinterpret_cast<char*>(header), sizeof header);
    if (header[0] != 1u) throw ConfigError("io", "unsupported field dump version");
    double scale;
    in.read(reinterpret_cast<char*>(&scale), sizeof scale);
    Field f(TorusGrid(static_cast<int>(header[1]), static_cast<int>(header[2]), scale),
            static_cast<Rank>(header[3]));
    in.read(reinterpret_cast<char*>(f.raw().data()),
            static_cast<std::streamsize>(f.raw().size() * sizeof(double)));
    if (!in) throw ConfigError("io", path + " is truncated");
    return f;
}

inline void write_field_csv(const Field& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("io", "cannot write " + path);
    char buf[32];
    out << "# dim=" << f.grid().dim() << " n=" << f.grid().n() << " rank=" << rank_name(f.rank())
        << " components=" << f.components() << " scale=";
    std::snprintf(buf, sizeof buf, "%.17g", f.grid().scale());
    out << buf << "\n";
    for (std::size_t p = 0; p < f.points(); ++p) {
        for (int c = 0; c < f.components(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", f.at(c, p));
            out << (c ? "," : "") << buf;
        }
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// CSV tables

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    void write(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw ConfigError("io", "cannot write " + path);
        for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
        out << "\n";
        char buf[32];
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                std::snprintf(buf, sizeof buf, "%.17g", row[i]);
                out << (i ? "," : "") << buf;
            }
            out << "\n";
        }
    }
};

// ---------------------------------------------------------------------------
// Tensor documents: one object per tensor with shape, row-major
// components, and certificates.

inline json matrix_json(const Mat& m) {
    json j;
    j["shape"] = {m.n, m.n};
    std::vector<double> comp;
    for (int i = 0; i < m.n; ++i)
        for (int k = 0; k < m.n; ++k) comp.push_back(m(i, k));
    j["components"] = comp;
    return j;
}

inline json eigen_matrix_json(const Eigen::MatrixXd& m) {
    json j;
    j["shape"] = {m.rows(), m.cols()};
    std::vector<double> comp;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index k = 0; k < m.cols(); ++k) comp.push_back(m(i, k));
    j["components"] = comp;
    return j;
}

inline json rank4_json(const Rank4& t) {
    json j;
    j["shape"] = {t.n, t.n, t.n, t.n};
    std::vector<double> comp;
    for (int i = 0; i < t.n; ++i)
        for (int k = 0; k < t.n; ++k)
            for (int l = 0; l < t.n; ++l)
                for (int h = 0; h < t.n; ++h) comp.push_back(t.full(i, k, l, h));
    j["components"] = comp;
    return j;
}

inline json rank3_json(const Rank3& t) {
    json j;
    j["shape"] = {t.n, t.n, t.n};
    std::vector<double> comp;
    for (int i = 0; i < t.n; ++i)
        for (int k = 0; k < t.n; ++k)
            for (int l = 0; l < t.n; ++l) comp.push_back(t.full(i, k, l));
    j["components"] = comp;
    return j;
}

inline json certificate_json(const SolveCertificate& c) {
    json j;
    j["iterations"] = c.iterations;
    j["relative_residual"] = c.rel_residual;
    j["preconditioned_residual"] = c.precond_residual;
    j["kernel_discard"] = c.kernel_discard;
    j["converged"] = c.converged;
    return j;
}

inline void write_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("io", "cannot write " + path);
    out << j.dump(2) << "\n";
}

} // namespace ehom

#endif
