#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "pfc/core/types.hpp"

namespace pfc {

/// Polar grid on each diagonal channel entry: m_r radial bins over [0, 3), m_theta
/// phase sectors over [−π, π), and one overflow cell for |h| ≥ 3.
/// Joint indices are mixed-radix, entry 0 least significant.
struct QuantGrid {
    static constexpr double kRadius = 3.0;

    int m_r = 2;
    int m_theta = 4;
    int n_sub = 4;

    void validate() const {
        if (m_r < 1 || m_theta < 1 || n_sub < 1) throw ConfigError("grid: m_r, m_theta and n_sub must be positive");
        double l = 1.0;
        for (int i = 0; i < n_sub; ++i) l *= cells_per_entry();
        if (l > 1e7) throw ConfigError("grid: total bin count exceeds 1e7");
    }

    std::size_t cells_per_entry() const { return static_cast<std::size_t>(m_r) * m_theta + 1; }
    std::size_t overflow_cell() const { return static_cast<std::size_t>(m_r) * m_theta; }

    std::size_t total_bins() const {
        std::size_t l = 1;
        for (int i = 0; i < n_sub; ++i) l *= cells_per_entry();
        return l;
    }

    /// Cell of one complex entry. arg(0) is taken as 0; θ = π wraps onto −π.
    std::size_t entry_cell(cplx h) const {
        const double r = std::abs(h);
        if (!(r < kRadius)) return overflow_cell();
        auto rb = static_cast<std::size_t>(std::floor(r * m_r / kRadius));
        if (rb >= static_cast<std::size_t>(m_r)) rb = m_r - 1;
        const double theta = r == 0.0 ? 0.0 : std::arg(h);
        auto s = static_cast<long>(std::floor((theta + std::numbers::pi) * m_theta / (2.0 * std::numbers::pi)));
        if (s >= m_theta) s = 0;
        if (s < 0) s = 0;
        return rb * m_theta + static_cast<std::size_t>(s);
    }

    /// Centre of a cell: mid-radius and mid-angle. The overflow cell keeps no phase,
    /// so its representative sits on the clipping circle at angle 0.
    cplx entry_representative(std::size_t cell) const {
        if (cell >= cells_per_entry()) throw DimensionError("grid: cell index out of range");
        if (cell == overflow_cell()) return {kRadius, 0.0};
        const auto rb = cell / m_theta, s = cell % m_theta;
        const double radius = (static_cast<double>(rb) + 0.5) * kRadius / m_r;
        const double angle = -std::numbers::pi + (static_cast<double>(s) + 0.5) * 2.0 * std::numbers::pi / m_theta;
        return std::polar(radius, angle);
    }

    std::size_t quantize(const Vec& h) const {
        require_dims(h.size() == n_sub, "quantize: vector length vs n_sub");
        std::size_t idx = 0, radix = 1;
        for (Eigen::Index i = 0; i < h.size(); ++i) {
            idx += entry_cell(h(i)) * radix;
            radix *= cells_per_entry();
        }
        return idx;
    }

    Vec representative(std::size_t index) const {
        if (index >= total_bins()) throw DimensionError("grid: bin index out of range");
        Vec out(n_sub);
        for (int i = 0; i < n_sub; ++i) {
            out(i) = entry_representative(index % cells_per_entry());
            index /= cells_per_entry();
        }
        return out;
    }

    bool operator==(const QuantGrid&) const = default;
};

/// Finite set of channel modes for the coupled Riccati equations: a diagonal
/// representative per mode and the successor mode reached by the channel's mean drift.
struct ModeSet {
    std::vector<Vec> reps;
    std::vector<std::size_t> next;

    std::size_t size() const { return reps.size(); }
    Mat h_hat(std::size_t l) const { return reps.at(l).asDiagonal(); }

    /// ℓ′ = quantize(α Ĥ_ℓ) for every bin of the grid.
    static ModeSet from_grid(const QuantGrid& grid, double alpha) {
        grid.validate();
        ModeSet m;
        const auto L = grid.total_bins();
        m.reps.reserve(L);
        m.next.reserve(L);
        for (std::size_t l = 0; l < L; ++l) {
            m.reps.push_back(grid.representative(l));
            m.next.push_back(grid.quantize(alpha * m.reps.back()));
        }
        return m;
    }

    /// Decomposition of the successor map ℓ → ℓ′ into its cycles and a processing order
    /// for the remaining nodes in which every node follows its successor.
    struct Structure {
        std::vector<std::vector<std::size_t>> cycles;  ///< each listed along ℓ → ℓ′
        std::vector<std::size_t> tree_order;
    };

    Structure structure() const {
        require_dims(next.size() == reps.size(), "mode set: successor list size");
        Structure out;
        std::vector<int> state(size(), 0);  // 0 new, 1 on current path, 2 finished
        std::vector<std::size_t> path;
        for (std::size_t s = 0; s < size(); ++s) {
            if (state[s]) continue;
            path.clear();
            std::size_t v = s;
            while (state[v] == 0) {
                state[v] = 1;
                path.push_back(v);
                v = next.at(v);
            }
            std::size_t tail = path.size();
            if (state[v] == 1) {
                auto it = std::find(path.begin(), path.end(), v);
                tail = static_cast<std::size_t>(it - path.begin());
                out.cycles.emplace_back(it, path.end());
            }
            for (std::size_t i = tail; i-- > 0;) out.tree_order.push_back(path[i]);
            for (auto p : path) state[p] = 2;
        }
        return out;
    }

    /// One self-looping mode; with rep = 1 this is the classical single-channel problem.
    static ModeSet single(const Vec& rep) { return ModeSet{{rep}, {0}}; }
};

}  // namespace pfc
