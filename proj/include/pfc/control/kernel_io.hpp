#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "pfc/control/riccati.hpp"

namespace pfc {

inline constexpr const char* kKernelFormatTag = "pfc-kernel-table v1";

/// Text dump: version tag, grid, α, Σ̄, then each kernel row-major as re/im pairs.
inline void write_kernel_table(std::ostream& os, const KernelTable& t) {
    if (!t.grid) throw ConfigError("kernel table: only grid-based tables can be serialized");
    auto num = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    auto mat = [&](const Mat& M) {
        os << M.rows() << ' ' << M.cols() << '\n';
        for (Eigen::Index i = 0; i < M.rows(); ++i) {
            for (Eigen::Index j = 0; j < M.cols(); ++j)
                os << (j ? " " : "") << num(M(i, j).real()) << ' ' << num(M(i, j).imag());
            os << '\n';
        }
    };
    os << kKernelFormatTag << '\n';
    os << "grid " << t.grid->m_r << ' ' << t.grid->m_theta << ' ' << t.grid->n_sub << '\n';
    os << "alpha " << num(t.alpha) << '\n';
    os << "sigma_bar ";
    mat(t.sigma_bar);
    os << "kernels " << t.kernels.size() << '\n';
    for (const auto& P : t.kernels) mat(P);
}

inline void save_kernel_table(const std::string& path, const KernelTable& t) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    write_kernel_table(f, t);
    if (!f) throw IoError("write failed for '" + path + "'");
}

/// Parses a dump; throws ConfigError when `expected` is given and the stored grid differs.
inline KernelTable read_kernel_table(std::istream& is, const std::optional<QuantGrid>& expected = std::nullopt) {
    auto fail = [](const std::string& why) { return IoError("kernel table: " + why); };
    std::string line;
    if (!std::getline(is, line) || line != kKernelFormatTag) throw fail("missing or unknown version tag");
    std::string word;
    QuantGrid g;
    if (!(is >> word >> g.m_r >> g.m_theta >> g.n_sub) || word != "grid") throw fail("malformed grid line");
    g.validate();
    if (expected && !(*expected == g))
        throw ConfigError("kernel table: stored grid (" + std::to_string(g.m_r) + "," + std::to_string(g.m_theta) +
                          "," + std::to_string(g.n_sub) + ") does not match the configured grid");
    KernelTable t;
    t.grid = g;
    if (!(is >> word >> t.alpha) || word != "alpha") throw fail("malformed alpha line");
    auto mat = [&]() {
        Eigen::Index r = 0, c = 0;
        if (!(is >> r >> c) || r <= 0 || c <= 0) throw fail("malformed matrix header");
        Mat M(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j) {
                double re = 0, im = 0;
                if (!(is >> re >> im)) throw fail("truncated matrix");
                M(i, j) = {re, im};
            }
        return M;
    };
    if (!(is >> word) || word != "sigma_bar") throw fail("missing sigma_bar");
    t.sigma_bar = mat();
    std::size_t n = 0;
    if (!(is >> word >> n) || word != "kernels") throw fail("missing kernels");
    if (n != g.total_bins()) throw fail("kernel count does not match grid");
    t.kernels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) t.kernels.push_back(mat());
    t.modes = ModeSet::from_grid(g, t.alpha);
    return t;
}

inline KernelTable load_kernel_table(const std::string& path, const std::optional<QuantGrid>& expected = std::nullopt) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open '" + path + "'");
    return read_kernel_table(f, expected);
}

}  // namespace pfc
