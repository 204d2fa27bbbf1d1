#pragma once

#include <array>
#include <span>
#include <vector>

#include "spider/model.hpp"
#include "spider/semigroup.hpp"

namespace spider {

// Density on the star graph S_k: one vector of cell averages per edge.
struct SpiderDensity {
    StarConfig config;
    Grid grid;
    std::vector<double> values;  // layout [j n_cells + n]
    double leaked_mass = 0.0;    // mass beyond the truncation length

    static SpiderDensity zeros(const StarConfig& config, const Grid& grid);

    [[nodiscard]] int k() const { return config.k; }
    [[nodiscard]] std::span<double> edge(int j);
    [[nodiscard]] std::span<const double> edge(int j) const;
    [[nodiscard]] double mass() const;
    [[nodiscard]] double total_mass() const { return mass() + leaked_mass; }
    [[nodiscard]] double min_value() const;
};

// Centered Gaussian density with variance t.
double gaussian_density(double t, double z);

// Transition density of Walsh's spider from (x, j) to (y, m) at time t:
// killed Brownian motion on edge j plus the reflected part shared out with
// weights alpha_m. Generator 1/2 d^2/dx^2 on every edge.
double spider_kernel(double t, double x, int j, double y, int m, const StarConfig& config);

// exp(t A_alpha) applied to the piecewise-constant density described by the
// cell averages of `psi`; the result holds exact cell averages. Mass carried
// past the truncation length is added to leaked_mass.
SpiderDensity evolve_spider(const SpiderDensity& psi, double t);

struct ResolventConstants {
    std::vector<double> C;
    std::vector<double> D;
};

// C_j and D_j of the resolvent representation for the piecewise-constant psi.
ResolventConstants resolvent_constants(double lambda, const SpiderDensity& psi);

// (lambda - A_alpha)^{-1} psi as exact cell averages; mass beyond L goes to leaked_mass.
SpiderDensity resolvent_spider(double lambda, const SpiderDensity& psi);

// J psi: every copy receives psi / k.
GridDensity embed_J(const SpiderDensity& psi);

// J^{-1} phi = k phi(., 0, j); phi must not depend on the copy index (within 1e-10).
SpiderDensity restrict_Jinv(const GridDensity& phi);

struct SpiderBoundary {
    std::vector<double> value;  // extrapolated psi(0, j)
    std::vector<double> slope;  // one-sided psi'(0, j)
    double weight_spread = 0.0;  // max_j |psi(0,j)/alpha_j - mean_i psi(0,i)/alpha_i|
    double flux_sum = 0.0;       // sum_j psi'(0, j)
};

SpiderBoundary spider_boundary(const SpiderDensity& psi);

// Analytic test function psi(x, j) = p_j(x) exp(-x^2 / 2) with cubic
// polynomials p_j, differentiable in closed form up to third order.
struct PolyGaussProfile {
    std::vector<std::array<double, 4>> coeffs;  // p_j(x) = c0 + c1 x + c2 x^2 + c3 x^3

    [[nodiscard]] int k() const { return static_cast<int>(coeffs.size()); }
    // d-th derivative (0 <= d <= 3) at x on edge j.
    [[nodiscard]] double eval(int j, double x, int d = 0) const;

    // Profile in dom(A_alpha^2): p_j = alpha_j (1 + x^2) + b_j x + c_j x^3, sum b = sum c = 0.
    static PolyGaussProfile in_domain(const StarConfig& config, std::span<const double> b, std::span<const double> c);
};

// alpha_j sqrt(2/pi) x^2 exp(-x^2/2): unit mass, vanishes at the center.
PolyGaussProfile bump_profile(const StarConfig& config);

// Cell averages of the d-th derivative of `profile` (8-point Gauss-Legendre per cell).
SpiderDensity discretize(const PolyGaussProfile& profile, const StarConfig& config, const Grid& grid, int d = 0);

}  // namespace spider
