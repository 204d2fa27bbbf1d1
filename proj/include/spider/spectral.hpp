#pragma once

#include <vector>

#include "spider/matrices.hpp"
#include "spider/model.hpp"
#include "spider/semigroup.hpp"
#include "spider/walsh.hpp"

namespace spider {

struct MuNu {
    double mu = 0.0;
    double nu = 0.0;
    double kappa = 0.0;  // eps mu + eps^2 lambda / (k-1)
};

// Decay rates of the kernel of lambda - G_eps (extended generator).
MuNu mu_nu(double lambda, double eps, const StarConfig& config);

// Limit of mu as eps -> 0.
double mu_zero(double lambda, const StarConfig& config);

struct EigenCoefficients {
    double lambda = 0.0;
    double eps = 0.0;
    double mu = 0.0;
    double nu = 0.0;
    Matrix E;  // E(i, j) = phi(0, i, j)

    // max_j |sum_{i != j} E_ij - (k-1) E_jj / (eps (nu - mu))|
    [[nodiscard]] double constraint_residual() const;
};

// Fills mu and nu and checks the kernel constraint (tolerance 1e-10 relative to max |E|).
EigenCoefficients make_eigen_coefficients(double lambda, double eps, const Matrix& E, const StarConfig& config);

// Exact cell averages of the kernel function determined by `coeffs`.
GridDensity eigen_kernel(const EigenCoefficients& coeffs, const MatrixSet& mats, const StarConfig& config,
                         const Grid& grid);

// Point value phi(x, i, j) of the same function.
double eigen_kernel_at(const EigenCoefficients& coeffs, const MatrixSet& mats, double x, int i, int j);

// L1 norm of the two defining ODE relations, with forward differences on cell averages.
double eigen_ode_residual(const GridDensity& phi, double lambda, double eps, const MatrixSet& mats);

// phi_eps = psi u + (eps/k psi' + eps^2/k^2 psi'') v
GridDensity chi_eps(const SpiderDensity& psi, const SpiderDensity& d1, const SpiderDensity& d2, double eps);

// Same construction for the boundary values phi_eps(0, i, j).
Matrix chi_eps_boundary(const std::vector<double>& psi0, const std::vector<double>& d1,
                        const std::vector<double>& d2, double eps);

// (eps^-1 A + eps^-2 Q) phi_eps, the transport part taken from the supplied
// derivatives d1..d3 (cell averages of psi', psi'', psi''') instead of differencing.
GridDensity generator_chi_eps(const SpiderDensity& psi, const SpiderDensity& d1, const SpiderDensity& d2,
                              const SpiderDensity& d3, double eps, const MatrixSet& mats);

// psi m for a k x k structure matrix m.
GridDensity times_structure(const SpiderDensity& psi, const Matrix& m);

// u: all ones; v: diagonal k-1, off-diagonal -1; w: diagonal (k-1)^2, off-diagonal 1.
Matrix structure_u(int k);
Matrix structure_v(int k);
Matrix structure_w(int k);

// Values indexed by ordered pairs (i, j), i != j, row-major in i then j.
struct BoundaryVector {
    int k = 0;
    std::vector<double> values;

    static BoundaryVector zeros(int k);
    [[nodiscard]] std::size_t index(int i, int j) const;
    double& at(int i, int j) { return values[index(i, j)]; }
    [[nodiscard]] double at(int i, int j) const { return values[index(i, j)]; }
    [[nodiscard]] double max_abs() const;
};

// Transmission-condition residuals of the boundary values b(i, j) = phi(0, i, j).
BoundaryVector apply_F(const Matrix& boundary, const MatrixSet& mats);

// Limit functional built from D_j = psi'(0, j); sum D must vanish.
BoundaryVector F_alpha(const std::vector<double>& D, const MatrixSet& mats);

// (1/(k-1)) sum of all entries.
double sigma(const BoundaryVector& upsilon);

// The unique kernel function with F phi = upsilon, as its coefficient matrix.
EigenCoefficients solve_K(double lambda, double eps, const BoundaryVector& upsilon, const MatrixSet& mats,
                          const StarConfig& config);

}  // namespace spider
