#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace spider {

// Tolerance on the simplex constraint for spider weights.
inline constexpr double kSimplexTol = 1e-12;

// Star graph S_k together with the spider weights.
// Edges are indexed 0..k-1 in ascending weight order. `order[s]` is the
// caller's original label of sorted edge s, so results can be mapped back
// with `user_edge()`.
struct StarConfig {
    int k = 0;
    int ell = 0;  // k - 1: inward speed and interface multiplicity
    std::vector<double> alpha;
    std::vector<int> order;

    [[nodiscard]] int user_edge(int sorted_edge) const { return order.at(static_cast<std::size_t>(sorted_edge)); }
    [[nodiscard]] int sorted_edge(int user_label) const;

    friend bool operator==(const StarConfig&, const StarConfig&) = default;
};

// Validates (k, alpha); weights are sorted ascending and the permutation kept.
StarConfig validate_star_config(int k, std::span<const double> alpha);

// Re-validates an existing config. Idempotent: returns a value equal to `config`.
StarConfig validate_star_config(const StarConfig& config);

// Uniform grid of cells [n h, (n+1) h) truncating the half line at L = n_cells h.
struct Grid {
    double h = 0.0;
    std::size_t n_cells = 0;

    [[nodiscard]] double length() const { return h * static_cast<double>(n_cells); }
    [[nodiscard]] double center(std::size_t n) const { return h * (static_cast<double>(n) + 0.5); }

    friend bool operator==(const Grid&, const Grid&) = default;
};

Grid make_grid(double h, std::size_t n_cells);

// Grid with cell width h covering [0, L]; L must be a multiple of h up to rounding.
Grid make_grid_for_length(double h, double length);

}  // namespace spider
