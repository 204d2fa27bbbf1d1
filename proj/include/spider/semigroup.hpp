#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spider/matrices.hpp"
#include "spider/model.hpp"

namespace spider {

// Finite-volume density on k copies of S_k.
// Component (i, j) is the density on edge j of copy i, stored as cell
// averages. Mass that left the truncated domain [0, L) is accumulated in
// `leaked_mass` so that mass() + leaked_mass is conserved by evolutions.
struct GridDensity {
    StarConfig config;
    Grid grid;
    std::vector<double> values;  // layout [(i k + j) n_cells + n]
    double leaked_mass = 0.0;

    static GridDensity zeros(const StarConfig& config, const Grid& grid);

    [[nodiscard]] int k() const { return config.k; }
    [[nodiscard]] std::size_t n_cells() const { return grid.n_cells; }

    [[nodiscard]] std::span<double> component(int i, int j);
    [[nodiscard]] std::span<const double> component(int i, int j) const;

    double& at(int i, int j, std::size_t n) { return values[offset(i, j) + n]; }
    [[nodiscard]] double at(int i, int j, std::size_t n) const { return values[offset(i, j) + n]; }

    // h * sum of all cell values (leak excluded).
    [[nodiscard]] double mass() const;
    [[nodiscard]] double total_mass() const { return mass() + leaked_mass; }
    [[nodiscard]] double min_value() const;

private:
    [[nodiscard]] std::size_t offset(int i, int j) const
    {
        return (static_cast<std::size_t>(i) * static_cast<std::size_t>(config.k) + static_cast<std::size_t>(j)) *
               grid.n_cells;
    }
};

// Exact transport semigroup over m cells (t = m h).
GridDensity transport_T(const GridDensity& phi, long m, const MatrixSet& mats);

// Same, for a time t that must be an integer multiple of h.
GridDensity transport_T_time(const GridDensity& phi, double t, const MatrixSet& mats);

// Copy-jump generator: (Q phi)(i, j) = sum_k q^j_{k,i} phi(k, j).
GridDensity apply_Q(const GridDensity& phi, const MatrixSet& mats);

// exp(s Q) applied edge by edge.
GridDensity scatter_exp(const GridDensity& phi, double s, const MatrixSet& mats);

// Average over the copy index, replicated across copies.
GridDensity project_P(const GridDensity& phi);

enum class SplitScheme { lie, strang };

SplitScheme parse_scheme(const std::string& name);
const char* scheme_name(SplitScheme scheme);

struct EvolveResult {
    GridDensity density;
    long steps = 0;
    double step = 0.0;        // eps h
    double t_used = 0.0;      // steps * step
    double t_rounding = 0.0;  // t_used - requested t
};

inline constexpr long kDefaultStepBudget = 50'000'000;

// Splitting approximation of exp(t G_eps) with one transport cell per step.
EvolveResult evolve_Geps(const GridDensity& phi, double t, double eps, const MatrixSet& mats,
                         SplitScheme scheme = SplitScheme::strang, long step_budget = kDefaultStepBudget);

struct DomainResidual {
    double transmission_residual = 0.0;
    GridDensity derivative;  // upwind estimate of A phi
    Matrix boundary;         // extrapolated phi(0, i, j)
};

DomainResidual domain_residual(const GridDensity& phi, const MatrixSet& mats);

// Averages blocks of `factor` cells into one; leaked mass is carried over.
GridDensity coarsen(const GridDensity& phi, std::size_t factor);

// sum_{i,j,n} h |a - b|.
double l1_distance(const GridDensity& a, const GridDensity& b);

// CSV table (i, j, cell, value) preceded by a schema line and a JSON header
// {k, h, n_cells, leaked_mass, alpha, edge_labels}.
inline constexpr const char* kGridDensitySchema = "spider.grid_density/1";

void write_grid_density(std::ostream& out, const GridDensity& phi, const std::string& manifest = {});
void write_grid_density(const std::string& path, const GridDensity& phi, const std::string& manifest = {});
GridDensity read_grid_density(std::istream& in);
GridDensity read_grid_density(const std::string& path);

}  // namespace spider
