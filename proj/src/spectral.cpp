#include "spider/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spider/error.hpp"

namespace spider {

MuNu mu_nu(double lambda, double eps, const StarConfig& config)
{
    require(lambda > 0.0 && eps > 0.0, "mu_nu needs lambda > 0 and eps > 0");
    const double k = config.k;
    const double l = config.ell;
    MuNu r;
    r.mu = (eps * lambda * (k - 2.0) + std::sqrt(std::pow(lambda * eps * k, 2) + 4.0 * k * l * lambda)) / (2.0 * l);
    r.nu = lambda * eps + 1.0 / eps;
    r.kappa = eps * r.mu + eps * eps * lambda / l;
    const double lhs = 1.0 / (eps * (r.nu - r.mu));
    if (!(r.nu > r.mu) || std::abs(lhs - (r.kappa + 1.0)) > 1e-12 * std::max(1.0, lhs)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "mu/nu identity fails: " << lhs << " vs " << r.kappa + 1.0;
        throw NumericalError(msg.str());
    }
    return r;
}

double mu_zero(double lambda, const StarConfig& config)
{
    require(lambda > 0.0, "mu_zero needs lambda > 0");
    return std::sqrt(static_cast<double>(config.k) / config.ell * lambda);
}

double EigenCoefficients::constraint_residual() const
{
    const auto k = static_cast<int>(E.rows());
    const double factor = (k - 1) / (eps * (nu - mu));
    double worst = 0.0;
    for (int j = 0; j < k; ++j) {
        double s = 0.0;
        for (int i = 0; i < k; ++i) {
            if (i != j) {
                s += E(i, j);
            }
        }
        worst = std::max(worst, std::abs(s - factor * E(j, j)));
    }
    return worst;
}

EigenCoefficients make_eigen_coefficients(double lambda, double eps, const Matrix& E, const StarConfig& config)
{
    require(E.rows() == config.k && E.cols() == config.k, "coefficient matrix must be k x k");
    const MuNu mn = mu_nu(lambda, eps, config);
    EigenCoefficients c{lambda, eps, mn.mu, mn.nu, E};
    const double scale = std::max(1.0, E.cwiseAbs().maxCoeff());
    if (c.constraint_residual() > 1e-10 * scale) {
        throw ParameterError("coefficients violate the kernel constraint");
    }
    return c;
}

namespace {

// Mean of exp(-rho x) over [a, a + h).
double exp_cell_mean(double rho, double a, double h)
{
    const double u = rho * h;
    const double factor = u < 1e-12 ? 1.0 - 0.5 * u : -std::expm1(-u) / u;
    return std::exp(-rho * a) * factor;
}

struct TrimmedSpectrum {
    std::vector<int> others;  // original copy index of each trimmed row
    Vector theta;
    Matrix V;
};

TrimmedSpectrum trimmed_spectrum(const MatrixSet& mats, int j)
{
    TrimmedSpectrum ts;
    const TrimmedIntensity tq = trim_Q(mats.Q[static_cast<std::size_t>(j)], j);
    for (int i = 0; i < mats.k(); ++i) {
        if (i != j) {
            ts.others.push_back(i);
        }
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(tq.Qt);
    ts.theta = es.eigenvalues();
    ts.V = es.eigenvectors();
    return ts;
}

}  // namespace

GridDensity eigen_kernel(const EigenCoefficients& coeffs, const MatrixSet& mats, const StarConfig& config,
                         const Grid& grid)
{
    const int k = config.k;
    require(mats.k() == k && coeffs.E.rows() == k, "eigen_kernel: size mismatch");
    const double scale = std::max(1.0, coeffs.E.cwiseAbs().maxCoeff());
    if (coeffs.constraint_residual() > 1e-10 * scale) {
        throw ParameterError("coefficients violate the kernel constraint");
    }
    const double mu = coeffs.mu;
    const double nu = coeffs.nu;
    const double eps = coeffs.eps;
    const double h = grid.h;
    const double shared = 1.0 / (eps * (nu - mu));

    GridDensity phi = GridDensity::zeros(config, grid);
    std::vector<double> slow(grid.n_cells);
    std::vector<double> fast(grid.n_cells);
    for (std::size_t n = 0; n < grid.n_cells; ++n) {
        slow[n] = exp_cell_mean(mu, h * static_cast<double>(n), h);
        fast[n] = exp_cell_mean(nu, h * static_cast<double>(n), h);
    }

    for (int j = 0; j < k; ++j) {
        const double Ejj = coeffs.E(j, j);
        auto diag = phi.component(j, j);
        for (std::size_t n = 0; n < grid.n_cells; ++n) {
            diag[n] = Ejj * slow[n];
        }
        const TrimmedSpectrum ts = trimmed_spectrum(mats, j);
        const auto m = static_cast<int>(ts.others.size());
        // weight[r] for target row t: sum_s E(others[s], j) V(s, r) V(t, r)
        Vector projected = Vector::Zero(m);
        for (int r = 0; r < m; ++r) {
            for (int s = 0; s < m; ++s) {
                projected(r) += coeffs.E(ts.others[static_cast<std::size_t>(s)], j) * ts.V(s, r);
            }
        }
        for (int t = 0; t < m; ++t) {
            auto dst = phi.component(ts.others[static_cast<std::size_t>(t)], j);
            for (std::size_t n = 0; n < grid.n_cells; ++n) {
                dst[n] = Ejj * shared * (slow[n] - fast[n]);
            }
            for (int r = 0; r < m; ++r) {
                const double w = projected(r) * ts.V(t, r);
                if (w == 0.0) {
                    continue;
                }
                const double rho = nu - ts.theta(r) / eps;
                for (std::size_t n = 0; n < grid.n_cells; ++n) {
                    dst[n] += w * exp_cell_mean(rho, h * static_cast<double>(n), h);
                }
            }
        }
    }
    return phi;
}

double eigen_kernel_at(const EigenCoefficients& coeffs, const MatrixSet& mats, double x, int i, int j)
{
    require(x >= 0.0, "eigen_kernel_at needs x >= 0");
    if (i == j) {
        return coeffs.E(j, j) * std::exp(-coeffs.mu * x);
    }
    const TrimmedIntensity tq = trim_Q(mats.Q[static_cast<std::size_t>(j)], j);
    const Matrix p = sym_expm(tq.Qt, x / coeffs.eps);
    auto trimmed = [j](int c) { return c < j ? c : c - 1; };
    double s = 0.0;
    for (int c = 0; c < mats.k(); ++c) {
        if (c != j) {
            s += coeffs.E(c, j) * p(trimmed(c), trimmed(i));
        }
    }
    const double shared = coeffs.E(j, j) / (coeffs.eps * (coeffs.nu - coeffs.mu));
    return std::exp(-coeffs.nu * x) * s + shared * (std::exp(-coeffs.mu * x) - std::exp(-coeffs.nu * x));
}

double eigen_ode_residual(const GridDensity& phi, double lambda, double eps, const MatrixSet& mats)
{
    const int k = phi.k();
    const double l = phi.config.ell;
    const double h = phi.grid.h;
    const std::size_t N = phi.n_cells();
    double total = 0.0;
    for (int j = 0; j < k; ++j) {
        const Matrix& Q = mats.Q[static_cast<std::size_t>(j)];
        for (std::size_t n = 0; n + 1 < N; ++n) {
            // forward difference against the cell value: first order in h
            auto val = [&](int i) { return phi.at(i, j, n); };
            auto der = [&](int i) { return (phi.at(i, j, n + 1) - phi.at(i, j, n)) / h; };
            double off = 0.0;
            for (int i = 0; i < k; ++i) {
                if (i != j) {
                    off += val(i);
                }
            }
            total += h * std::abs((lambda * eps * eps + l) * val(j) - eps * l * der(j) - off);
            for (int i = 0; i < k; ++i) {
                if (i == j) {
                    continue;
                }
                double mix = 0.0;
                for (int c = 0; c < k; ++c) {
                    mix += Q(c, i) * val(c);
                }
                total += h * std::abs(lambda * eps * eps * val(i) + eps * der(i) - mix);
            }
        }
    }
    return total;
}

Matrix structure_u(int k)
{
    return Matrix::Ones(k, k);
}

Matrix structure_v(int k)
{
    Matrix v = Matrix::Constant(k, k, -1.0);
    v.diagonal().setConstant(k - 1.0);
    return v;
}

Matrix structure_w(int k)
{
    Matrix w = Matrix::Ones(k, k);
    w.diagonal().setConstant((k - 1.0) * (k - 1.0));
    return w;
}

GridDensity times_structure(const SpiderDensity& psi, const Matrix& m)
{
    const int k = psi.k();
    require(m.rows() == k && m.cols() == k, "structure matrix must be k x k");
    GridDensity phi = GridDensity::zeros(psi.config, psi.grid);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            auto src = psi.edge(j);
            auto dst = phi.component(i, j);
            for (std::size_t n = 0; n < src.size(); ++n) {
                dst[n] = m(i, j) * src[n];
            }
        }
    }
    return phi;
}

namespace {

void require_same_layout(const SpiderDensity& a, const SpiderDensity& b)
{
    require(a.config == b.config && a.grid == b.grid, "derivative densities must share config and grid");
}

// c0 a + c1 b + c2 c, edge by edge
SpiderDensity combine(const SpiderDensity& a, double c0, const SpiderDensity& b, double c1, const SpiderDensity& c,
                      double c2)
{
    SpiderDensity out = SpiderDensity::zeros(a.config, a.grid);
    for (std::size_t n = 0; n < out.values.size(); ++n) {
        out.values[n] = c0 * a.values[n] + c1 * b.values[n] + c2 * c.values[n];
    }
    return out;
}

void add_scaled(GridDensity& acc, const GridDensity& x, double s)
{
    for (std::size_t n = 0; n < acc.values.size(); ++n) {
        acc.values[n] += s * x.values[n];
    }
}

}  // namespace

GridDensity chi_eps(const SpiderDensity& psi, const SpiderDensity& d1, const SpiderDensity& d2, double eps)
{
    require(eps >= 0.0, "chi_eps needs eps >= 0");
    require_same_layout(psi, d1);
    require_same_layout(psi, d2);
    const int k = psi.k();
    const double a = eps / k;
    GridDensity out = times_structure(psi, structure_u(k));
    add_scaled(out, times_structure(combine(d1, a, d2, a * a, d2, 0.0), structure_v(k)), 1.0);
    return out;
}

Matrix chi_eps_boundary(const std::vector<double>& psi0, const std::vector<double>& d1,
                        const std::vector<double>& d2, double eps)
{
    const auto k = static_cast<int>(psi0.size());
    require(d1.size() == psi0.size() && d2.size() == psi0.size(), "boundary derivatives missing");
    const double a = eps / k;
    const Matrix u = structure_u(k);
    const Matrix v = structure_v(k);
    Matrix b(k, k);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            const auto jj = static_cast<std::size_t>(j);
            b(i, j) = u(i, j) * psi0[jj] + v(i, j) * (a * d1[jj] + a * a * d2[jj]);
        }
    }
    return b;
}

GridDensity generator_chi_eps(const SpiderDensity& psi, const SpiderDensity& d1, const SpiderDensity& d2,
                              const SpiderDensity& d3, double eps, const MatrixSet& mats)
{
    require(eps > 0.0, "generator needs eps > 0");
    require_same_layout(psi, d3);
    const int k = psi.k();
    const double a = eps / k;
    const double l = psi.config.ell;

    // transport part: l phi' on the diagonal, -phi' off it
    Matrix speed = Matrix::Constant(k, k, -1.0);
    speed.diagonal().setConstant(l);
    const Matrix su = speed.cwiseProduct(structure_u(k));
    const Matrix sv = speed.cwiseProduct(structure_v(k));
    GridDensity out = times_structure(d1, su);
    add_scaled(out, times_structure(combine(d2, a, d3, a * a, d3, 0.0), sv), 1.0);
    for (double& x : out.values) {
        x /= eps;
    }
    add_scaled(out, apply_Q(chi_eps(psi, d1, d2, eps), mats), 1.0 / (eps * eps));
    return out;
}

BoundaryVector BoundaryVector::zeros(int k)
{
    return BoundaryVector{k, std::vector<double>(static_cast<std::size_t>(k * (k - 1)), 0.0)};
}

std::size_t BoundaryVector::index(int i, int j) const
{
    if (i == j || i < 0 || j < 0 || i >= k || j >= k) {
        throw ParameterError("boundary vector index out of range");
    }
    return static_cast<std::size_t>(i * (k - 1) + (j < i ? j : j - 1));
}

double BoundaryVector::max_abs() const
{
    double m = 0.0;
    for (double v : values) {
        m = std::max(m, std::abs(v));
    }
    return m;
}

BoundaryVector apply_F(const Matrix& boundary, const MatrixSet& mats)
{
    const int k = mats.k();
    require(boundary.rows() == k && boundary.cols() == k, "boundary values must be k x k");
    const double l = k - 1.0;
    BoundaryVector out = BoundaryVector::zeros(k);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            if (i != j) {
                out.at(i, j) = boundary(i, j) - l * mats.P(i, j) * boundary(i, i) -
                               l * mats.P(j, j) * mats.R(j, i) * boundary(j, j);
            }
        }
    }
    return out;
}

BoundaryVector F_alpha(const std::vector<double>& D, const MatrixSet& mats)
{
    const int k = mats.k();
    require(D.size() == static_cast<std::size_t>(k), "F_alpha needs k boundary slopes");
    double sum = 0.0;
    double scale = 0.0;
    for (double d : D) {
        sum += d;
        scale = std::max(scale, std::abs(d));
    }
    if (std::abs(sum) > 1e-10 * std::max(1.0, scale)) {
        throw ParameterError("boundary slopes must sum to zero");
    }
    const double l2 = (k - 1.0) * (k - 1.0);
    BoundaryVector out = BoundaryVector::zeros(k);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            if (i != j) {
                const auto ii = static_cast<std::size_t>(i);
                const auto jj = static_cast<std::size_t>(j);
                out.at(i, j) = D[jj] * (1.0 + l2 * mats.P(j, j) * mats.R(j, i)) + D[ii] * l2 * mats.P(i, j);
            }
        }
    }
    return out;
}

double sigma(const BoundaryVector& upsilon)
{
    double s = 0.0;
    for (double v : upsilon.values) {
        s += v;
    }
    return s / (upsilon.k - 1.0);
}

EigenCoefficients solve_K(double lambda, double eps, const BoundaryVector& upsilon, const MatrixSet& mats,
                          const StarConfig& config)
{
    const int k = config.k;
    require(upsilon.k == k && mats.k() == k, "solve_K: size mismatch");
    const double l = config.ell;
    const MuNu mn = mu_nu(lambda, eps, config);

    RowVector eta = RowVector::Zero(k);
    for (int j = 0; j < k; ++j) {
        for (int i = 0; i < k; ++i) {
            if (i != j) {
                eta(j) += upsilon.at(i, j);
            }
        }
        eta(j) /= l;
    }
    const RowVector xi = resolvent_P(mats.P, mn.kappa, eta);

    Matrix E = Matrix::Zero(k, k);
    for (int j = 0; j < k; ++j) {
        E(j, j) = xi(j);
    }
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            if (i != j) {
                E(i, j) = upsilon.at(i, j) + l * mats.P(i, j) * xi(i) + l * mats.P(j, j) * mats.R(j, i) * xi(j);
            }
        }
    }
    EigenCoefficients c{lambda, eps, mn.mu, mn.nu, E};
    const double scale = std::max(1.0, E.cwiseAbs().maxCoeff());
    if (c.constraint_residual() > 1e-10 * scale) {
        throw NumericalError("solve_K produced coefficients outside the kernel");
    }
    return c;
}

}  // namespace spider
