// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "spider/error.hpp"
#include "spider/matrices.hpp"
#include "spider/pdmp.hpp"
#include "spider/semigroup.hpp"
#include "spider/spectral.hpp"
#include "spider/walsh.hpp"
#include "support.hpp"

using namespace spider;
using namespace testing_support;

namespace {

struct Outcome {
    bool ok = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b)
{
    double m = 0.0;
    for (std::size_t q = 0; q < a.size(); ++q) {
        m = std::max(m, std::abs(a[q] - b[q]));
    }
    return m;
}

// 1. transport semigroup law
Outcome semigroup_law()
{
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<long> steps(0, 40);
    double worst = 0.0;
    for (int k : {2, 3, 4}) {
        for (int trial = 0; trial < 10; ++trial) {
            const BalancedSet b = random_balanced(k, rng);
            const Grid g = make_grid(1.0 / 16, 48);
            const GridDensity phi = random_density(b.config, g, rng);
            const long m1 = steps(rng);
            const long m2 = steps(rng);
            const GridDensity two = transport_T(transport_T(phi, m1, b.mats), m2, b.mats);
            const GridDensity one = transport_T(phi, m1 + m2, b.mats);
            worst = std::max(worst, max_abs_diff(two.values, one.values));
            worst = std::max(worst, std::abs(two.leaked_mass - one.leaked_mass));
        }
    }
    return {worst <= 1e-13, fmt("max deviation %.2e over 30 (k, P, R, density) draws", worst)};
}

// 2. Markov property of the three evolutions
Outcome markov_property()
{
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double mass_err = 0.0;
    double min_value = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int k = 2 + trial % 3;
        const BalancedSet b = random_balanced(k, rng);
        const Grid g = make_grid(1.0 / 32, 64);
        const GridDensity phi = random_density(b.config, g, rng);
        const double m0 = phi.total_mass();
        const GridDensity outs[] = {
            transport_T(phi, static_cast<long>(80 * u(rng)), b.mats),
            scatter_exp(phi, 3.0 * u(rng), b.mats),
            evolve_Geps(phi, 0.25 * u(rng), 0.1 + 0.3 * u(rng), b.mats).density,
        };
        for (const auto& o : outs) {
            mass_err = std::max(mass_err, std::abs(o.total_mass() - m0));
            min_value = std::min(min_value, o.min_value());
        }
    }
    return {mass_err <= 1e-8 && min_value >= 0.0,
            fmt("mass error %.2e, smallest value %.2e on 50 inputs x 3 evolutions", mass_err, min_value)};
}

// 3. balance of the (delta, gamma) family
Outcome balance_family()
{
    std::mt19937_64 rng(303);
    double balance = 0.0;
    double rows = 0.0;
    int count = 0;
    for (int k : {3, 4, 5}) {
        const StarConfig c = validate_star_config(k, random_alpha(k, rng));
        const double lo = 1.0 / (k - 1.0);
        for (int a = 0; a < 5; ++a) {
            const double delta = lo + (1.0 - lo) * a / 4.0;
            const double g0 = gamma_min(k, delta);
            for (int b = 0; b < 5; ++b) {
                const double gamma = g0 + (1.0 - g0) * (0.05 + 0.95 * b / 4.0);
                const PRPair pr = family_delta_gamma(c, delta, gamma);
                balance = std::max(balance, check_balance(pr.P, pr.R, c));
                rows = std::max(rows, (pr.P.rowwise().sum().array() - 1.0).abs().maxCoeff());
                ++count;
            }
        }
    }
    return {balance <= 1e-12 && rows <= 1e-12 && count == 75,
            fmt("balance %.2e, row-sum error %.2e on %g (k, delta, gamma) points", balance, rows, count)};
}

// 4. ergodic limit of the family P
Outcome ergodicity()
{
    std::mt19937_64 rng(404);
    double worst = 0.0;
    int used = 0;
    for (int k : {3, 4, 5}) {
        const StarConfig c = validate_star_config(k, random_alpha(k, rng));
        const double lo = 1.0 / (k - 1.0);
        for (int a = 0; a < 5; ++a) {
            const double delta = lo + (1.0 - lo) * a / 4.0;
            const double g0 = gamma_min(k, delta);
            for (int b = 0; b < 5; ++b) {
                const double gamma = g0 + (1.0 - g0) * (0.05 + 0.95 * b / 4.0);
                const PRPair pr = family_delta_gamma(c, delta, gamma);
                const ErgodicLimit lim = ergodic_projection(pr.P, 1e-12, 1000000);
                used = std::max(used, lim.n_used);
                for (int i = 0; i < k; ++i) {
                    for (int j = 0; j < k; ++j) {
                        worst = std::max(worst, std::abs(lim.Pi(i, j) - c.alpha[static_cast<std::size_t>(j)]));
                    }
                }
            }
        }
    }
    return {worst <= 1e-8, fmt("rows of lim P^n differ from alpha by %.2e (max n = %g)", worst, used)};
}

// 5. the eigen kernel solves its ODE system, first order in h
Outcome eigen_kernel_ode()
{
    const StarConfig c = config_235();
    const MatrixSet mats = make_family_matrix_set(c, 0.5, 0.8);
    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double lo = 1e9;
    double hi = 0.0;
    double constraint = 0.0;
    for (double lambda : {1.0, 2.0}) {
        for (double eps : {0.2, 0.1}) {
            BoundaryVector ups = BoundaryVector::zeros(3);
            for (double& x : ups.values) {
                x = u(rng);
            }
            const EigenCoefficients co = solve_K(lambda, eps, ups, mats, c);
            constraint = std::max(constraint, co.constraint_residual());
            double previous = 0.0;
            for (int level = 0; level < 3; ++level) {
                const Grid g = make_grid_for_length(1.0 / (64 << level), 8.0);
                const double r = eigen_ode_residual(eigen_kernel(co, mats, c, g), lambda, eps, mats);
                if (level > 0) {
                    lo = std::min(lo, previous / r);
                    hi = std::max(hi, previous / r);
                }
                previous = r;
            }
        }
    }
    return {lo >= 1.7 && hi <= 2.3 && constraint <= 1e-10,
            fmt("residual ratios in [%.3f, %.3f] per h-halving, constraint %.2e", lo, hi, constraint)};
}

// 6. solver round trip and its eps -> 0 limit
Outcome solver_round_trip()
{
    const StarConfig c = config_235();
    const MatrixSet mats = make_family_matrix_set(c, 0.5, 0.8);
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double trip = 0.0;
    double ratio = 1e9;
    for (int trial = 0; trial < 20; ++trial) {
        BoundaryVector ups = BoundaryVector::zeros(3);
        for (double& x : ups.values) {
            x = u(rng);
        }
        for (double lambda : {1.0, 2.0}) {
            Matrix target(3, 3);
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    target(i, j) = sigma(ups) / mu_zero(lambda, c) * c.alpha[static_cast<std::size_t>(j)];
                }
            }
            double err[2];
            int q = 0;
            for (double eps : {0.1, 0.05}) {
                const EigenCoefficients co = solve_K(lambda, eps, ups, mats, c);
                trip = std::max(trip, max_abs_diff(apply_F(co.E, mats).values, ups.values));
                err[q++] = (eps * co.E - target).cwiseAbs().maxCoeff();
            }
            ratio = std::min(ratio, err[0] / err[1]);
        }
    }
    return {trip <= 1e-10 && ratio >= 1.8,
            fmt("round trip %.2e on 80 solves, smallest limit-error ratio %.3f", trip, ratio)};
}

// 7. limits of the expansion, the boundary functional and the solver
Outcome expansion_limits()
{
    const StarConfig c = config_235();
    const MatrixSet mats = make_family_matrix_set(c, 0.5, 0.8);
    const int k = 3;
    const std::vector<double> b{0.4, -0.1, -0.3};
    const std::vector<double> cc{0.2, 0.1, -0.3};
    const PolyGaussProfile p = PolyGaussProfile::in_domain(c, b, cc);
    const Grid g = make_grid_for_length(1.0 / 64, 8.0);
    const SpiderDensity psi = discretize(p, c, g, 0);
    const SpiderDensity d1 = discretize(p, c, g, 1);
    const SpiderDensity d2 = discretize(p, c, g, 2);
    const SpiderDensity d3 = discretize(p, c, g, 3);
    std::vector<double> at0, slope0, curv0;
    for (int j = 0; j < k; ++j) {
        at0.push_back(p.eval(j, 0.0, 0));
        slope0.push_back(p.eval(j, 0.0, 1));
        curv0.push_back(p.eval(j, 0.0, 2));
    }
    const GridDensity psi_u = times_structure(psi, structure_u(k));
    GridDensity limit = times_structure(d2, structure_w(k));
    const GridDensity d2v = times_structure(d2, structure_v(k));
    for (std::size_t q = 0; q < limit.values.size(); ++q) {
        limit.values[q] -= d2v.values[q];
    }
    const BoundaryVector fa = F_alpha(slope0, mats);

    std::vector<std::vector<double>> errors(4);
    for (double eps : {0.2, 0.1, 0.05, 0.025}) {
        const GridDensity phi = chi_eps(psi, d1, d2, eps);
        errors[0].push_back(l1_distance(phi, psi_u));
        GridDensity gen = generator_chi_eps(psi, d1, d2, d3, eps, mats);
        for (double& x : gen.values) {
            x *= k;
        }
        errors[1].push_back(l1_distance(gen, limit));
        const BoundaryVector f = apply_F(chi_eps_boundary(at0, slope0, curv0, eps), mats);
        double e = 0.0;
        for (std::size_t q = 0; q < f.values.size(); ++q) {
            e = std::max(e, std::abs(f.values[q] / eps + fa.values[q] / k));
        }
        errors[2].push_back(e);
        errors[3].push_back(solve_K(1.0, eps, f, mats, c).E.cwiseAbs().maxCoeff());
    }
    double ratio = 1e9;
    for (const auto& e : errors) {
        for (std::size_t q = 1; q < e.size(); ++q) {
            ratio = std::min(ratio, e[q - 1] / e[q]);
        }
    }
    const double s = std::abs(sigma(fa));
    return {ratio >= 1.8 && s <= 1e-12,
            fmt("smallest error ratio %.3f over 4 limits x 3 halvings, |sigma F_alpha psi| = %.1e", ratio, s)};
}

// 8. the spider kernel and resolvent
Outcome spider_kernel_validity()
{
    const StarConfig c = config_235();
    double mass_err = 0.0;
    double min_value = 0.0;
    for (double t : {0.05, 0.5, 2.0}) {
        for (double x : {0.0, 0.4, 1.5}) {
            for (int j = 0; j < 3; ++j) {
                double total = 0.0;
                for (int m = 0; m < 3; ++m) {
                    total += integrate_half_line([&](double y) { return spider_kernel(t, x, j, y, m, c); });
                    for (double y = 0.0; y < 8.0; y += 0.1) {
                        min_value = std::min(min_value, spider_kernel(t, x, j, y, m, c));
                    }
                }
                mass_err = std::max(mass_err, std::abs(total - 1.0));
            }
        }
    }

    std::mt19937_64 rng(808);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double duality = 0.0;
    for (int pair = 0; pair < 10; ++pair) {
        std::array<double, 3> fa{}, fb{}, pa{}, pb{};
        for (int m = 0; m < 3; ++m) {
            fa[static_cast<std::size_t>(m)] = u(rng);
            fb[static_cast<std::size_t>(m)] = u(rng);
            pa[static_cast<std::size_t>(m)] = 1.0 + u(rng);
            pb[static_cast<std::size_t>(m)] = u(rng);
        }
        const double t = 0.1 + 0.2 * pair;
        // f takes the same value at the center on every edge
        auto f = [&](double y, int m) {
            const auto mm = static_cast<std::size_t>(m);
            return (1.0 + fa[mm] * y + fb[mm] * y * y) * std::exp(-y * y / 2);
        };
        auto psi = [&](double x, int j) {
            const auto jj = static_cast<std::size_t>(j);
            return (pa[jj] + pb[jj] * x + x * x) * std::exp(-x * x);
        };
        double lhs = 0.0;
        double rhs = 0.0;
        for (int j = 0; j < 3; ++j) {
            lhs += integrate_half_line([&](double x) { return psi(x, j) * feller_apply(t, f, c, x, j); });
        }
        for (int m = 0; m < 3; ++m) {
            rhs += integrate_half_line([&](double y) {
                double evolved = 0.0;
                for (int j = 0; j < 3; ++j) {
                    evolved +=
                        integrate_half_line([&](double x) { return spider_kernel(t, x, j, y, m, c) * psi(x, j); });
                }
                return f(y, m) * evolved;
            });
        }
        duality = std::max(duality, std::abs(lhs - rhs));
    }

    const Grid g = make_grid_for_length(1.0 / 256, 24.0);
    SpiderDensity start = discretize(bump_profile(c), c, g);
    for (std::size_t n = 0; n < g.n_cells; ++n) {
        start.edge(2)[n] *= 0.3;
    }
    double resolvent_mass = 0.0;
    double resolvent_min = 0.0;
    for (double lambda : {0.5, 1.0, 3.0}) {
        const SpiderDensity r = resolvent_spider(lambda, start);
        resolvent_mass = std::max(resolvent_mass, std::abs(lambda * r.mass() - start.mass()));
        resolvent_min = std::min(resolvent_min, r.min_value());
    }
    const bool ok = min_value >= 0.0 && mass_err <= 1e-8 && duality <= 1e-6 && resolvent_min >= 0.0 &&
                    resolvent_mass <= 1e-8;
    return {ok, fmt("kernel mass error %.1e, duality gap %.1e on 10 pairs, resolvent mass error %.1e, min %.1e",
                    mass_err, duality, resolvent_mass, std::min(min_value, resolvent_min))};
}

struct ConvergenceSetup {
    StarConfig config = config_235();
    MatrixSet mats = make_family_matrix_set(config, 0.5, 0.8);
    Grid grid = make_grid_for_length(1.0 / 256, 8.0);
    GridDensity init = embed_J(discretize(bump_profile(config), config, grid));
};

// 9. convergence of the scaled evolution to the spider
Outcome main_convergence()
{
    const ConvergenceSetup s;
    const double t = 0.5;
    const double speed = 2.0 * (s.config.k - 1.0) / s.config.k;
    const GridDensity reference = embed_J(evolve_spider(restrict_Jinv(project_P(s.init)), speed * t));
    std::string detail = "L1 by eps:";
    double previous = 1e9;
    bool decreasing = true;
    for (double eps : {0.2, 0.1, 0.05, 0.025}) {
        const double d = l1_distance(evolve_Geps(s.init, t, eps, s.mats).density, reference);
        decreasing = decreasing && d < previous;
        previous = d;
        detail += fmt(" %.3g->%.4f", eps, d);
    }
    return {decreasing && previous <= 0.05, detail};
}

// 10. particle simulation against the grid evolution
Outcome monte_carlo()
{
    const ConvergenceSetup s;
    const double eps = 0.05;
    const double t = 0.5;
    const GridDensity grid = coarsen(evolve_Geps(s.init, t, eps, s.mats).density, 32);
    const DensitySampler init(s.init);
    const SimulationOptions one{100000, t, eps, 12345, 1};
    SimulationOptions many = one;
    many.threads = 4;
    const Histogram a = simulate(one, s.mats, init, grid.grid, s.config);
    const Histogram b = simulate(many, s.mats, init, grid.grid, s.config);
    const double d = l1_distance(a, grid);
    const bool same = a == b;
    return {d <= 0.05 && same, fmt("L1 %.4f on bins of width %.3f, 1 vs 4 threads identical: ", d, grid.grid.h) +
                                   (same ? "yes" : "no")};
}

}  // namespace

int main()
{
    struct Criterion {
        int id;
        const char* name;
        double budget;  // seconds
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> all{
        {1, "transport semigroup law", 1.0, semigroup_law},
        {2, "Markov property", 10.0, markov_property},
        {3, "balance family", 1.0, balance_family},
        {4, "ergodicity", 1.0, ergodicity},
        {5, "eigen kernel ODE", 5.0, eigen_kernel_ode},
        {6, "solver round trip and limit", 5.0, solver_round_trip},
        {7, "expansion limits", 10.0, expansion_limits},
        {8, "spider kernel validity", 30.0, spider_kernel_validity},
        {9, "convergence to the spider", 300.0, main_convergence},
        {10, "Monte Carlo consistency", 120.0, monte_carlo},
    };
    int failures = 0;
    for (const auto& c : all) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool ok = o.ok && secs <= c.budget;
        failures += ok ? 0 : 1;
        std::printf("%s criterion %d (%s): %s [%.2f s of %.0f s]\n", ok ? "PASS" : "FAIL", c.id, c.name,
                    o.detail.c_str(), secs, c.budget);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(all.size()) - failures, all.size());
    return failures == 0 ? 0 : 1;
}
