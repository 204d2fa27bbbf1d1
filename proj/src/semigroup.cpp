#include "spider/semigroup.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spider/error.hpp"

namespace spider {

GridDensity GridDensity::zeros(const StarConfig& config, const Grid& grid)
{
    GridDensity phi;
    phi.config = config;
    phi.grid = grid;
    phi.values.assign(static_cast<std::size_t>(config.k * config.k) * grid.n_cells, 0.0);
    return phi;
}

std::span<double> GridDensity::component(int i, int j)
{
    return {values.data() + offset(i, j), grid.n_cells};
}

std::span<const double> GridDensity::component(int i, int j) const
{
    return {values.data() + offset(i, j), grid.n_cells};
}

double GridDensity::mass() const
{
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    return grid.h * sum;
}

double GridDensity::min_value() const
{
    return values.empty() ? 0.0 : *std::min_element(values.begin(), values.end());
}

namespace {

void check_compatible(const GridDensity& phi, const MatrixSet& mats)
{
    require(mats.k() == phi.k(), "matrix set and density disagree on k");
    require(mats.Q.size() == static_cast<std::size_t>(phi.k()), "matrix set needs k intensity matrices");
}

// Applies M^T along the copy index of every edge: out(i, j) = sum_k M_j(k, i) in(k, j).
GridDensity mix_copies(const GridDensity& phi, const std::vector<Matrix>& per_edge)
{
    const int k = phi.k();
    const std::size_t N = phi.n_cells();
    GridDensity out = GridDensity::zeros(phi.config, phi.grid);
    out.leaked_mass = phi.leaked_mass;
    for (int j = 0; j < k; ++j) {
        const Matrix& M = per_edge[static_cast<std::size_t>(j)];
        for (int i = 0; i < k; ++i) {
            auto dst = out.component(i, j);
            for (int c = 0; c < k; ++c) {
                const double w = M(c, i);
                if (w == 0.0) {
                    continue;
                }
                auto src = phi.component(c, j);
                for (std::size_t n = 0; n < N; ++n) {
                    dst[n] += w * src[n];
                }
            }
        }
    }
    return out;
}

std::vector<Matrix> scatter_matrices(const MatrixSet& mats, double s)
{
    std::vector<Matrix> out;
    out.reserve(mats.Q.size());
    for (const auto& Qj : mats.Q) {
        Matrix E = sym_expm(Qj, s);
        // Eigendecomposition round-off can leave entries of order -1e-17.
        E = E.cwiseMax(0.0);
        out.push_back(std::move(E));
    }
    return out;
}

// One transport step of m cells, writing into `out` (same shape as `in`).
void transport_into(const GridDensity& in, long m, const MatrixSet& mats, GridDensity& out)
{
    const int k = in.k();
    const std::size_t N = in.n_cells();
    const auto ell = static_cast<std::size_t>(in.config.ell);
    const auto shift = static_cast<std::size_t>(m);
    const double h = in.grid.h;

    std::fill(out.values.begin(), out.values.end(), 0.0);
    out.leaked_mass = in.leaked_mass;

    // Inflow sums: S_i(n) = sum of the ell diagonal cells of copy i that are
    // compressed into destination cell n < m.
    const std::size_t n_in = std::min<std::size_t>(shift, N);
    auto inflow_sum = [&](int i, std::size_t n) {
        auto diag = in.component(i, i);
        const std::size_t first = ell * (shift - n - 1);
        double s = 0.0;
        for (std::size_t q = 0; q < ell; ++q) {
            const std::size_t src = first + q;
            if (src < N) {
                s += diag[src];
            }
        }
        return s;
    };
    std::vector<double> inflow(static_cast<std::size_t>(k) * n_in, 0.0);
    for (int i = 0; i < k; ++i) {
        for (std::size_t n = 0; n < n_in; ++n) {
            inflow[static_cast<std::size_t>(i) * n_in + n] = inflow_sum(i, n);
        }
    }
    // Long jumps (m > N): diagonal mass routed to destinations past L leaks.
    if (shift > N) {
        const std::size_t reach = N / ell + 1;
        const std::size_t lo = std::max(N, shift > reach ? shift - reach : std::size_t{0});
        double lost = 0.0;
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
                if (i == j) {
                    continue;
                }
                for (std::size_t n = lo; n < shift; ++n) {
                    lost += mats.P(i, j) * inflow_sum(i, n) + mats.P(j, j) * mats.R(j, i) * inflow_sum(j, n);
                }
            }
        }
        out.leaked_mass += h * lost;
    }

    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            auto src = in.component(i, j);
            auto dst = out.component(i, j);
            if (i == j) {
                const std::size_t jump = ell * shift;
                for (std::size_t n = 0; n + jump < N; ++n) {
                    dst[n] = src[n + jump];
                }
                continue;
            }
            double lost = 0.0;
            const std::size_t keep = N > shift ? N - shift : 0;
            for (std::size_t n = keep; n < N; ++n) {
                lost += src[n];
            }
            out.leaked_mass += h * lost;
            for (std::size_t n = 0; n < keep; ++n) {
                dst[n + shift] = src[n];
            }
            const double from_i = mats.P(i, j);
            const double from_j = mats.P(j, j) * mats.R(j, i);
            const double* Si = inflow.data() + static_cast<std::size_t>(i) * n_in;
            const double* Sj = inflow.data() + static_cast<std::size_t>(j) * n_in;
            for (std::size_t n = 0; n < n_in; ++n) {
                dst[n] = from_i * Si[n] + from_j * Sj[n];
            }
        }
    }
}

}  // namespace

GridDensity transport_T(const GridDensity& phi, long m, const MatrixSet& mats)
{
    require(m >= 0, "transport_T needs m >= 0");
    check_compatible(phi, mats);
    if (m == 0) {
        return phi;
    }
    GridDensity out = GridDensity::zeros(phi.config, phi.grid);
    transport_into(phi, m, mats, out);
    return out;
}

GridDensity transport_T_time(const GridDensity& phi, double t, const MatrixSet& mats)
{
    require(t >= 0.0, "transport time must be nonnegative");
    const double cells = t / phi.grid.h;
    const double m = std::round(cells);
    require(std::abs(cells - m) <= 1e-9 * std::max(1.0, cells), "transport time is not a multiple of h");
    return transport_T(phi, static_cast<long>(m), mats);
}

GridDensity apply_Q(const GridDensity& phi, const MatrixSet& mats)
{
    check_compatible(phi, mats);
    GridDensity out = mix_copies(phi, mats.Q);
    out.leaked_mass = 0.0;
    return out;
}

GridDensity scatter_exp(const GridDensity& phi, double s, const MatrixSet& mats)
{
    require(s >= 0.0, "scatter_exp needs s >= 0");
    check_compatible(phi, mats);
    if (s == 0.0) {
        return phi;
    }
    return mix_copies(phi, scatter_matrices(mats, s));
}

GridDensity project_P(const GridDensity& phi)
{
    const int k = phi.k();
    const std::size_t N = phi.n_cells();
    GridDensity out = GridDensity::zeros(phi.config, phi.grid);
    out.leaked_mass = phi.leaked_mass;
    std::vector<double> avg(N);
    for (int j = 0; j < k; ++j) {
        std::fill(avg.begin(), avg.end(), 0.0);
        for (int i = 0; i < k; ++i) {
            auto src = phi.component(i, j);
            for (std::size_t n = 0; n < N; ++n) {
                avg[n] += src[n];
            }
        }
        for (double& v : avg) {
            v /= static_cast<double>(k);
        }
        for (int i = 0; i < k; ++i) {
            std::copy(avg.begin(), avg.end(), out.component(i, j).begin());
        }
    }
    return out;
}

SplitScheme parse_scheme(const std::string& name)
{
    if (name == "lie") {
        return SplitScheme::lie;
    }
    if (name == "strang") {
        return SplitScheme::strang;
    }
    throw ParameterError("unknown splitting scheme '" + name + "' (expected lie or strang)");
}

const char* scheme_name(SplitScheme scheme)
{
    return scheme == SplitScheme::lie ? "lie" : "strang";
}

EvolveResult evolve_Geps(const GridDensity& phi, double t, double eps, const MatrixSet& mats, SplitScheme scheme,
                         long step_budget)
{
    require(t >= 0.0, "evolve_Geps needs t >= 0");
    require(eps > 0.0, "evolve_Geps needs eps > 0");
    check_compatible(phi, mats);

    EvolveResult result;
    result.step = eps * phi.grid.h;
    const double ratio = t / result.step;
    require(ratio <= static_cast<double>(step_budget),
            "evolution needs " + std::to_string(ratio) + " steps, above the budget of " + std::to_string(step_budget));
    result.steps = std::lround(ratio);
    result.t_used = static_cast<double>(result.steps) * result.step;
    result.t_rounding = result.t_used - t;
    if (result.steps == 0) {
        result.density = phi;
        return result;
    }

    // Jump time per step: (eps h) / eps^2 = h / eps.
    const double jump_time = phi.grid.h / eps;
    GridDensity current = phi;
    GridDensity scratch = GridDensity::zeros(phi.config, phi.grid);
    if (scheme == SplitScheme::lie) {
        const auto full = scatter_matrices(mats, jump_time);
        for (long s = 0; s < result.steps; ++s) {
            current = mix_copies(current, full);
            transport_into(current, 1, mats, scratch);
            std::swap(current, scratch);
        }
    } else {
        const auto half = scatter_matrices(mats, 0.5 * jump_time);
        const auto full = scatter_matrices(mats, jump_time);
        current = mix_copies(current, half);
        for (long s = 0; s < result.steps; ++s) {
            transport_into(current, 1, mats, scratch);
            std::swap(current, scratch);
            current = mix_copies(current, s + 1 < result.steps ? full : half);
        }
    }
    result.density = std::move(current);
    return result;
}

DomainResidual domain_residual(const GridDensity& phi, const MatrixSet& mats)
{
    check_compatible(phi, mats);
    const int k = phi.k();
    const std::size_t N = phi.n_cells();
    const double h = phi.grid.h;
    const double ell = phi.config.ell;

    DomainResidual out;
    out.boundary = Matrix::Zero(k, k);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            auto c = phi.component(i, j);
            out.boundary(i, j) = 1.5 * c[0] - 0.5 * c[1];
        }
    }
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            if (i == j) {
                continue;
            }
            const double r = out.boundary(i, j) - ell * mats.P(i, j) * out.boundary(i, i) -
                             ell * mats.P(j, j) * mats.R(j, i) * out.boundary(j, j);
            out.transmission_residual = std::max(out.transmission_residual, std::abs(r));
        }
    }

    out.derivative = GridDensity::zeros(phi.config, phi.grid);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            auto c = phi.component(i, j);
            auto d = out.derivative.component(i, j);
            if (i == j) {
                // inward motion: upwind neighbour is the next cell
                for (std::size_t n = 0; n < N; ++n) {
                    const double next = n + 1 < N ? c[n + 1] : 0.0;
                    d[n] = ell * (next - c[n]) / h;
                }
            } else {
                d[0] = -(c[0] - out.boundary(i, j)) / (0.5 * h);
                for (std::size_t n = 1; n < N; ++n) {
                    d[n] = -(c[n] - c[n - 1]) / h;
                }
            }
        }
    }
    return out;
}

GridDensity coarsen(const GridDensity& phi, std::size_t factor)
{
    require(factor >= 1, "coarsening factor must be positive");
    require(phi.n_cells() % factor == 0, "cell count is not divisible by the coarsening factor");
    const Grid coarse = make_grid(phi.grid.h * static_cast<double>(factor), phi.n_cells() / factor);
    GridDensity out = GridDensity::zeros(phi.config, coarse);
    out.leaked_mass = phi.leaked_mass;
    const int k = phi.k();
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            auto src = phi.component(i, j);
            auto dst = out.component(i, j);
            for (std::size_t n = 0; n < coarse.n_cells; ++n) {
                double s = 0.0;
                for (std::size_t q = 0; q < factor; ++q) {
                    s += src[n * factor + q];
                }
                dst[n] = s / static_cast<double>(factor);
            }
        }
    }
    return out;
}

double l1_distance(const GridDensity& a, const GridDensity& b)
{
    require(a.k() == b.k() && a.grid == b.grid, "l1_distance needs densities on the same grid");
    double sum = 0.0;
    for (std::size_t q = 0; q < a.values.size(); ++q) {
        sum += std::abs(a.values[q] - b.values[q]);
    }
    return a.grid.h * sum;
}

}  // namespace spider
