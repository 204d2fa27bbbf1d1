#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spider/model.hpp"

namespace spider {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

inline constexpr double kStochasticTol = 1e-12;

// Interface and copy-jump matrices of the scaled transport process.
// P: transition matrix at the center (p(i, j): continue on edge j of copy i).
// R: copy-switch matrix on reflection, zero diagonal.
// Q[j]: symmetric intensity matrix of copy jumps on edge j.
struct MatrixSet {
    Matrix P;
    Matrix R;
    std::vector<Matrix> Q;

    [[nodiscard]] int k() const { return static_cast<int>(P.rows()); }
};

// Copy-jump intensities on edge j restricted to the other copies.
struct TrimmedIntensity {
    int base_edge = 0;
    Matrix Qt;
};

// Complete-graph intensity matrices: off-diagonal 1, diagonal -(k-1).
std::vector<Matrix> build_default_Q(const StarConfig& config);

// Throws ParameterError if any MatrixSet invariant fails.
void validate_matrix_set(const MatrixSet& mats, const StarConfig& config);

// max_{i != j} |alpha_j (1 - (k-1) p_jj r_ji) - (k-1) alpha_i p_ij|.
double check_balance(const Matrix& P, const Matrix& R, const StarConfig& config);

// Lower end of the admissible gamma interval for the (delta, gamma) family.
double gamma_min(int k, double delta);

struct PRPair {
    Matrix P;
    Matrix R;
};

// Explicit balanced (P, R) family parametrised by delta and gamma; k >= 3.
PRPair family_delta_gamma(const StarConfig& config, double delta, double gamma);

// k = 2: R is the swap matrix and P = [[1-g, g], [a0 g / a1, 1 - a0 g / a1]].
PRPair two_edge_family(const StarConfig& config, double gamma);

// Full MatrixSet from either family (delta ignored when k = 2) with default Q.
MatrixSet make_family_matrix_set(const StarConfig& config, double delta, double gamma);

struct ErgodicLimit {
    Matrix Pi;
    int n_used = 0;
    bool matches_alpha = false;
};

// Iterates P^n until all rows agree within `tol` (max-entry spread).
ErgodicLimit ergodic_projection(const Matrix& P, double tol, int max_n,
                                const std::vector<double>* alpha = nullptr);

// Solves (kappa + 1) xi - xi P = eta for the row vector xi.
RowVector resolvent_P(const Matrix& P, double kappa, const RowVector& eta);

// exp(t M) for symmetric M via eigendecomposition.
Matrix sym_expm(const Matrix& M, double t);

// (Q^j + I) with row and column j removed.
TrimmedIntensity trim_Q(const Matrix& Qj, int j);

// JSON interchange: {k, alpha, P, R, Q: [...]} with row-major nested arrays.
// `alpha` is written in sorted edge order.
std::string matrix_set_to_json(const MatrixSet& mats, const StarConfig& config, int indent = 2);
void write_matrix_set(const std::string& path, const MatrixSet& mats, const StarConfig& config);

struct LoadedMatrices {
    StarConfig config;
    MatrixSet mats;
};

LoadedMatrices matrix_set_from_json(const std::string& text);
LoadedMatrices read_matrix_set(const std::string& path);

}  // namespace spider
