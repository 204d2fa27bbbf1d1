#pragma once

// Shared fixtures and independent oracles for the test binaries.

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "spider/matrices.hpp"
#include "spider/model.hpp"
#include "spider/semigroup.hpp"
#include "spider/walsh.hpp"

namespace testing_support {

using namespace spider;

inline StarConfig config_235()
{
    const std::vector<double> a{0.2, 0.3, 0.5};
    return validate_star_config(3, a);
}

// random point of the simplex, bounded away from 0
inline std::vector<double> random_alpha(int k, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(0.2, 1.0);
    std::vector<double> a(static_cast<std::size_t>(k));
    double s = 0.0;
    for (auto& x : a) {
        x = u(rng);
        s += x;
    }
    for (auto& x : a) {
        x /= s;
    }
    // push the rounding error into the last weight
    double head = 0.0;
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
        head += a[i];
    }
    a.back() = 1.0 - head;
    return a;
}

struct BalancedSet {
    StarConfig config;
    MatrixSet mats;
};

inline BalancedSet random_balanced(int k, std::mt19937_64& rng)
{
    BalancedSet b;
    b.config = validate_star_config(k, random_alpha(k, rng));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (k == 2) {
        b.mats = make_family_matrix_set(b.config, 1.0, 0.1 + 0.8 * u(rng));
        return b;
    }
    const double lo = 1.0 / (k - 1.0);
    const double delta = lo + (1.0 - lo) * u(rng);
    const double g0 = gamma_min(k, delta);
    const double gamma = g0 + (1.0 - g0) * (0.05 + 0.9 * u(rng));
    b.mats = make_family_matrix_set(b.config, delta, gamma);
    return b;
}

inline GridDensity random_density(const StarConfig& config, const Grid& grid, std::mt19937_64& rng)
{
    GridDensity phi = GridDensity::zeros(config, grid);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : phi.values) {
        v = u(rng);
    }
    const double m = phi.mass();
    for (auto& v : phi.values) {
        v /= m;
    }
    return phi;
}

inline double gauss(double t, double z)
{
    return std::exp(-z * z / (2.0 * t)) / std::sqrt(2.0 * std::numbers::pi * t);
}

template <class F>
double integrate_half_line(F f)
{
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        f, 0.0, std::numeric_limits<double>::infinity(), 15, 1e-13);
}

// Feller semigroup of the spider at (x, j), built from the killed and the
// reflected Brownian semigroups: T_min(f_j - fbar) + T_ref fbar.
template <class F>
double feller_apply(double t, const F& f, const StarConfig& config, double x, int j)
{
    auto fbar = [&](double y) {
        double s = 0.0;
        for (int m = 0; m < config.k; ++m) {
            s += config.alpha[static_cast<std::size_t>(m)] * f(y, m);
        }
        return s;
    };
    const double killed = integrate_half_line(
        [&](double y) { return (gauss(t, x - y) - gauss(t, x + y)) * (f(y, j) - fbar(y)); });
    const double reflected =
        integrate_half_line([&](double y) { return (gauss(t, x - y) + gauss(t, x + y)) * fbar(y); });
    return killed + reflected;
}

}  // namespace testing_support
