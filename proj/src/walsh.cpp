#include "spider/walsh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss.hpp>

#include "spider/error.hpp"

namespace spider {

SpiderDensity SpiderDensity::zeros(const StarConfig& config, const Grid& grid)
{
    SpiderDensity psi;
    psi.config = config;
    psi.grid = grid;
    psi.values.assign(static_cast<std::size_t>(config.k) * grid.n_cells, 0.0);
    return psi;
}

std::span<double> SpiderDensity::edge(int j)
{
    return {values.data() + static_cast<std::size_t>(j) * grid.n_cells, grid.n_cells};
}

std::span<const double> SpiderDensity::edge(int j) const
{
    return {values.data() + static_cast<std::size_t>(j) * grid.n_cells, grid.n_cells};
}

double SpiderDensity::mass() const
{
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    return grid.h * sum;
}

double SpiderDensity::min_value() const
{
    return values.empty() ? 0.0 : *std::min_element(values.begin(), values.end());
}

double gaussian_density(double t, double z)
{
    return std::exp(-z * z / (2.0 * t)) / std::sqrt(2.0 * std::numbers::pi * t);
}

double spider_kernel(double t, double x, int j, double y, int m, const StarConfig& config)
{
    require(t > 0.0, "spider_kernel needs t > 0");
    require(x >= 0.0 && y >= 0.0, "spider_kernel needs x, y >= 0");
    require(j >= 0 && j < config.k && m >= 0 && m < config.k, "edge index out of range");
    const double reflected = gaussian_density(t, x + y);
    const double killed = j == m ? gaussian_density(t, x - y) - reflected : 0.0;
    return killed + 2.0 * config.alpha[static_cast<std::size_t>(m)] * reflected;
}

namespace {

double upper_normal_tail(double z)
{
    return 0.5 * std::erfc(z / std::numbers::sqrt2);
}

// Heat-kernel integrals with variance sigma^2 = t, written so that no
// cancellation between O(L) quantities occurs.
struct HeatCell {
    double sigma;
    double h;

    [[nodiscard]] double g(double z) const
    {
        return std::exp(-0.5 * (z / sigma) * (z / sigma)) / (sigma * std::sqrt(2.0 * std::numbers::pi));
    }

    // Second antiderivative of g minus its linear asymptote, u >= 0.
    [[nodiscard]] double psi2c(double u) const { return sigma * sigma * g(u) - u * upper_normal_tail(u / sigma); }

    // Antiderivative of the upper tail, vanishing at +infinity.
    [[nodiscard]] double tail_antiderivative(double z) const
    {
        return z * upper_normal_tail(z / sigma) - sigma * sigma * g(z);
    }

    // Mean over a destination cell of the heat kernel from a source cell of unit
    // average, destination index minus source index = d.
    [[nodiscard]] double cell_to_cell(long d) const
    {
        const double dd = static_cast<double>(d);
        double s = psi2c(h * std::abs(dd + 1.0)) - 2.0 * psi2c(h * std::abs(dd)) + psi2c(h * std::abs(dd - 1.0));
        if (d == 0) {
            s += h;
        }
        return std::max(0.0, s / h);
    }
};

}  // namespace

SpiderDensity evolve_spider(const SpiderDensity& psi, double t)
{
    require(t >= 0.0, "evolve_spider needs t >= 0");
    if (t == 0.0) {
        return psi;
    }
    const int k = psi.k();
    const auto N = static_cast<long>(psi.grid.n_cells);
    const double h = psi.grid.h;
    const double L = psi.grid.length();
    const HeatCell heat{std::sqrt(t), h};

    // table[d + N] for d in [-N, 2N]
    std::vector<double> table(static_cast<std::size_t>(3 * N + 1));
    for (long d = -N; d <= 2 * N; ++d) {
        table[static_cast<std::size_t>(d + N)] = heat.cell_to_cell(d);
    }
    auto G = [&](long d) { return table[static_cast<std::size_t>(d + N)]; };

    std::vector<double> total(static_cast<std::size_t>(N), 0.0);
    for (int j = 0; j < k; ++j) {
        auto e = psi.edge(j);
        for (long n = 0; n < N; ++n) {
            total[static_cast<std::size_t>(n)] += e[static_cast<std::size_t>(n)];
        }
    }

    SpiderDensity out = SpiderDensity::zeros(psi.config, psi.grid);
    out.leaked_mass = psi.leaked_mass;

    std::vector<double> reflected(static_cast<std::size_t>(N), 0.0);
    for (long n = 0; n < N; ++n) {
        double s = 0.0;
        for (long q = 0; q < N; ++q) {
            s += total[static_cast<std::size_t>(q)] * G(n + q + 1);
        }
        reflected[static_cast<std::size_t>(n)] = s;
    }

    // Tail weights of a unit-average source cell [a, b): killed and reflected
    // mass arriving beyond L.
    std::vector<double> tail_killed(static_cast<std::size_t>(N));
    std::vector<double> tail_reflected(static_cast<std::size_t>(N));
    for (long q = 0; q < N; ++q) {
        const double a = h * static_cast<double>(q);
        const double b = a + h;
        const double direct = heat.tail_antiderivative(L - a) - heat.tail_antiderivative(L - b);
        const double mirror = heat.tail_antiderivative(L + b) - heat.tail_antiderivative(L + a);
        tail_killed[static_cast<std::size_t>(q)] = std::max(0.0, direct - mirror);
        tail_reflected[static_cast<std::size_t>(q)] = mirror;
    }

    double leaked = 0.0;
    for (int m = 0; m < k; ++m) {
        auto src = psi.edge(m);
        auto dst = out.edge(m);
        const double weight = 2.0 * psi.config.alpha[static_cast<std::size_t>(m)];
        for (long n = 0; n < N; ++n) {
            double s = 0.0;
            for (long q = 0; q < N; ++q) {
                const double killed = std::max(0.0, G(n - q) - G(n + q + 1));
                s += src[static_cast<std::size_t>(q)] * killed;
            }
            dst[static_cast<std::size_t>(n)] = s + weight * reflected[static_cast<std::size_t>(n)];
        }
        for (long q = 0; q < N; ++q) {
            leaked += src[static_cast<std::size_t>(q)] * tail_killed[static_cast<std::size_t>(q)] +
                      weight * total[static_cast<std::size_t>(q)] * tail_reflected[static_cast<std::size_t>(q)];
        }
    }
    out.leaked_mass += leaked;
    return out;
}

namespace {

// u + expm1(-u), accurate for small u.
double exp_defect(double u)
{
    if (u < 1e-2) {
        const double u2 = u * u;
        return u2 * (0.5 - u / 6.0 + u2 / 24.0 - u2 * u / 120.0 + u2 * u2 / 720.0);
    }
    return u + std::expm1(-u);
}

}  // namespace

ResolventConstants resolvent_constants(double lambda, const SpiderDensity& psi)
{
    require(lambda > 0.0, "resolvent needs lambda > 0");
    const double s = std::sqrt(2.0 * lambda);
    const double h = psi.grid.h;
    const double cell = -std::expm1(-s * h) / s;  // integral of exp(-s y) over [0, h)
    ResolventConstants rc;
    rc.C.assign(static_cast<std::size_t>(psi.k()), 0.0);
    for (int j = 0; j < psi.k(); ++j) {
        auto e = psi.edge(j);
        double c = 0.0;
        for (std::size_t n = 0; n < e.size(); ++n) {
            c += e[n] * std::exp(-s * h * static_cast<double>(n)) * cell;
        }
        rc.C[static_cast<std::size_t>(j)] = c / s;
    }
    double sumC = 0.0;
    for (double c : rc.C) {
        sumC += c;
    }
    rc.D.resize(rc.C.size());
    for (std::size_t j = 0; j < rc.C.size(); ++j) {
        rc.D[j] = 2.0 * psi.config.alpha[j] * sumC - rc.C[j];
    }
    double sumD = 0.0;
    for (double d : rc.D) {
        sumD += d;
    }
    if (std::abs(sumD - sumC) > 1e-12 * std::max(1.0, std::abs(sumC))) {
        throw NumericalError("resolvent constants violate sum D = sum C");
    }
    return rc;
}

SpiderDensity resolvent_spider(double lambda, const SpiderDensity& psi)
{
    const ResolventConstants rc = resolvent_constants(lambda, psi);
    const double s = std::sqrt(2.0 * lambda);
    const double h = psi.grid.h;
    const double L = psi.grid.length();
    const auto N = static_cast<long>(psi.grid.n_cells);
    const double u = s * h;
    const double s3 = s * s * s;

    // Cell-to-cell means of exp(-s|x-y|)/s, indexed by |d|.
    std::vector<double> table(static_cast<std::size_t>(N));
    table[0] = 2.0 * exp_defect(u) / (h * s3);
    const double gap = std::expm1(-u) * std::expm1(-u) / (h * s3);
    for (long d = 1; d < N; ++d) {
        table[static_cast<std::size_t>(d)] = std::exp(-u * static_cast<double>(d - 1)) * gap;
    }
    const double cell_mean = -std::expm1(-u) / u;  // mean of exp(-s x) over [0, h)

    SpiderDensity out = SpiderDensity::zeros(psi.config, psi.grid);
    double leaked = 0.0;
    for (int j = 0; j < psi.k(); ++j) {
        auto src = psi.edge(j);
        auto dst = out.edge(j);
        const double Dj = rc.D[static_cast<std::size_t>(j)];
        for (long n = 0; n < N; ++n) {
            double acc = 0.0;
            for (long q = 0; q < N; ++q) {
                acc += src[static_cast<std::size_t>(q)] * table[static_cast<std::size_t>(std::abs(n - q))];
            }
            dst[static_cast<std::size_t>(n)] = acc + Dj * std::exp(-u * static_cast<double>(n)) * cell_mean;
        }
        for (long q = 0; q < N; ++q) {
            const double b = h * static_cast<double>(q + 1);
            const double a = b - h;
            leaked += src[static_cast<std::size_t>(q)] * (std::exp(-s * (L - b)) - std::exp(-s * (L - a))) / s3;
        }
        leaked += Dj * std::exp(-s * L) / s;
    }
    out.leaked_mass = leaked + psi.leaked_mass / lambda;
    return out;
}

GridDensity embed_J(const SpiderDensity& psi)
{
    const int k = psi.k();
    GridDensity phi = GridDensity::zeros(psi.config, psi.grid);
    phi.leaked_mass = psi.leaked_mass;
    const double inv_k = 1.0 / static_cast<double>(k);
    for (int j = 0; j < k; ++j) {
        auto e = psi.edge(j);
        for (int i = 0; i < k; ++i) {
            auto c = phi.component(i, j);
            for (std::size_t n = 0; n < e.size(); ++n) {
                c[n] = e[n] * inv_k;
            }
        }
    }
    return phi;
}

SpiderDensity restrict_Jinv(const GridDensity& phi)
{
    const int k = phi.k();
    for (int j = 0; j < k; ++j) {
        auto first = phi.component(0, j);
        for (int i = 1; i < k; ++i) {
            auto c = phi.component(i, j);
            for (std::size_t n = 0; n < c.size(); ++n) {
                if (std::abs(c[n] - first[n]) > 1e-10) {
                    throw ParameterError("restrict_Jinv needs a density that does not depend on the copy index");
                }
            }
        }
    }
    SpiderDensity psi = SpiderDensity::zeros(phi.config, phi.grid);
    psi.leaked_mass = phi.leaked_mass;
    for (int j = 0; j < k; ++j) {
        auto src = phi.component(0, j);
        auto dst = psi.edge(j);
        for (std::size_t n = 0; n < src.size(); ++n) {
            dst[n] = static_cast<double>(k) * src[n];
        }
    }
    return psi;
}

SpiderBoundary spider_boundary(const SpiderDensity& psi)
{
    const int k = psi.k();
    SpiderBoundary b;
    b.value.resize(static_cast<std::size_t>(k));
    b.slope.resize(static_cast<std::size_t>(k));
    double mean = 0.0;
    for (int j = 0; j < k; ++j) {
        auto e = psi.edge(j);
        b.value[static_cast<std::size_t>(j)] = 1.5 * e[0] - 0.5 * e[1];
        b.slope[static_cast<std::size_t>(j)] = (e[1] - e[0]) / psi.grid.h;
        b.flux_sum += b.slope[static_cast<std::size_t>(j)];
        mean += b.value[static_cast<std::size_t>(j)] / psi.config.alpha[static_cast<std::size_t>(j)];
    }
    mean /= static_cast<double>(k);
    for (int j = 0; j < k; ++j) {
        const double w = b.value[static_cast<std::size_t>(j)] / psi.config.alpha[static_cast<std::size_t>(j)];
        b.weight_spread = std::max(b.weight_spread, std::abs(w - mean));
    }
    return b;
}

double PolyGaussProfile::eval(int j, double x, int d) const
{
    const auto& c = coeffs.at(static_cast<std::size_t>(j));
    const double p = c[0] + x * (c[1] + x * (c[2] + x * c[3]));
    const double p1 = c[1] + x * (2.0 * c[2] + 3.0 * x * c[3]);
    const double p2 = 2.0 * c[2] + 6.0 * x * c[3];
    const double p3 = 6.0 * c[3];
    const double g = std::exp(-0.5 * x * x);
    switch (d) {
    case 0:
        return p * g;
    case 1:
        return (p1 - x * p) * g;
    case 2:
        return (p2 - 2.0 * x * p1 + (x * x - 1.0) * p) * g;
    case 3:
        return (p3 - 3.0 * x * p2 + 3.0 * (x * x - 1.0) * p1 + (3.0 * x - x * x * x) * p) * g;
    default:
        throw ParameterError("PolyGaussProfile supports derivatives up to order 3");
    }
}

PolyGaussProfile PolyGaussProfile::in_domain(const StarConfig& config, std::span<const double> b,
                                             std::span<const double> c)
{
    const int k = config.k;
    require(b.size() == static_cast<std::size_t>(k) && c.size() == static_cast<std::size_t>(k),
            "profile needs k slope and cubic coefficients");
    double sb = 0.0;
    double sc = 0.0;
    for (int j = 0; j < k; ++j) {
        sb += b[static_cast<std::size_t>(j)];
        sc += c[static_cast<std::size_t>(j)];
    }
    require(std::abs(sb) <= 1e-12 && std::abs(sc) <= 1e-12, "profile coefficients b and c must sum to zero");
    PolyGaussProfile prof;
    for (int j = 0; j < k; ++j) {
        const double a = config.alpha[static_cast<std::size_t>(j)];
        prof.coeffs.push_back({a, b[static_cast<std::size_t>(j)], a, c[static_cast<std::size_t>(j)]});
    }
    return prof;
}

PolyGaussProfile bump_profile(const StarConfig& config)
{
    PolyGaussProfile prof;
    const double c = std::sqrt(2.0 / std::numbers::pi);
    for (double a : config.alpha) {
        prof.coeffs.push_back({0.0, 0.0, a * c, 0.0});
    }
    return prof;
}

SpiderDensity discretize(const PolyGaussProfile& profile, const StarConfig& config, const Grid& grid, int d)
{
    require(profile.k() == config.k, "profile and config disagree on k");
    SpiderDensity psi = SpiderDensity::zeros(config, grid);
    using Rule = boost::math::quadrature::gauss<double, 8>;
    for (int j = 0; j < config.k; ++j) {
        auto e = psi.edge(j);
        for (std::size_t n = 0; n < grid.n_cells; ++n) {
            const double a = grid.h * static_cast<double>(n);
            e[n] = Rule::integrate([&](double x) { return profile.eval(j, x, d); }, a, a + grid.h) / grid.h;
        }
    }
    return psi;
}

}  // namespace spider
