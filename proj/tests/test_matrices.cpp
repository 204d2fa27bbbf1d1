#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <string>

#include "spider/error.hpp"
#include "spider/matrices.hpp"
#include "support.hpp"

using namespace spider;
using testing_support::random_alpha;

namespace {

// balance residual by direct substitution, written independently of the library
double balance_by_hand(const Matrix& P, const Matrix& R, const std::vector<double>& a)
{
    const int k = static_cast<int>(P.rows());
    double worst = 0.0;
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            if (i == j) {
                continue;
            }
            const double lhs = a[static_cast<std::size_t>(j)] * (1.0 - (k - 1) * P(j, j) * R(j, i));
            const double rhs = (k - 1) * a[static_cast<std::size_t>(i)] * P(i, j);
            worst = std::max(worst, std::abs(lhs - rhs));
        }
    }
    return worst;
}

double max_row_sum_error(const Matrix& M)
{
    return (M.rowwise().sum().array() - 1.0).abs().maxCoeff();
}

}  // namespace

TEST_CASE("default intensities")
{
    const std::vector<double> a2{0.5, 0.5};
    auto Q2 = build_default_Q(validate_star_config(2, a2));
    Matrix expect(2, 2);
    expect << -1, 1, 1, -1;
    CHECK(Q2[0] == expect);
    CHECK(Q2[1] == expect);

    auto Q3 = build_default_Q(testing_support::config_235());
    CHECK(Q3[0](0, 0) == -2.0);
    CHECK(Q3[0](0, 1) == 1.0);
    CHECK(Q3[0](0, 2) == 1.0);
    for (const auto& Q : Q3) {
        CHECK(Q.rowwise().sum().cwiseAbs().maxCoeff() == 0.0);
        CHECK(Q == Q.transpose());
    }
}

TEST_CASE("two-state balance examples")
{
    Matrix P(2, 2);
    P << 0.7, 0.3, 0.1, 0.9;
    Matrix R(2, 2);
    R << 0, 1, 1, 0;
    const std::vector<double> a{0.25, 0.75};
    CHECK(check_balance(P, R, validate_star_config(2, a)) <= 1e-15);
    const std::vector<double> half{0.5, 0.5};
    CHECK(check_balance(P, R, validate_star_config(2, half)) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("two-state balance holds for every p, q")
{
    Matrix R(2, 2);
    R << 0, 1, 1, 0;
    for (double p = 0.05; p < 1.0; p += 0.1) {
        for (double q = 0.05; q < 1.0; q += 0.1) {
            Matrix P(2, 2);
            P << 1 - p, p, q, 1 - q;
            std::vector<double> a{q / (p + q), p / (p + q)};
            a[1] = 1.0 - a[0];
            const StarConfig c = validate_star_config(2, a);
            // the config may have swapped the edges
            Matrix Ps = P;
            if (c.user_edge(0) == 1) {
                Ps << 1 - q, q, p, 1 - p;
            }
            CHECK(check_balance(Ps, R, c) <= 1e-14);
        }
    }
}

TEST_CASE("gamma_min")
{
    CHECK(std::abs(gamma_min(3, 0.5)) <= 1e-15);
    CHECK(gamma_min(3, 1.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(gamma_min(4, 0.5) == doctest::Approx(3.0 / 8.0).epsilon(1e-14));
    CHECK_THROWS_AS(gamma_min(2, 1.0), ParameterError);
    CHECK_THROWS_AS(gamma_min(3, 0.4), ParameterError);
    CHECK_THROWS_AS(gamma_min(3, 1.1), ParameterError);
}

TEST_CASE("delta-gamma family examples")
{
    const std::vector<double> third{1.0 / 3, 1.0 / 3, 1.0 / 3};
    std::vector<double> t3 = third;
    t3[2] = 1.0 - t3[0] - t3[1];
    const StarConfig c = validate_star_config(3, t3);
    auto pr = family_delta_gamma(c, 0.5, 1.0);
    CHECK(std::abs(pr.P(0, 0)) <= 1e-15);
    CHECK(max_row_sum_error(pr.P) <= 1e-12);
    CHECK(balance_by_hand(pr.P, pr.R, c.alpha) <= 1e-12);

    const StarConfig c235 = testing_support::config_235();
    auto simple = family_delta_gamma(c235, 0.5, 0.5);
    const auto& a = c235.alpha;
    for (int i = 0; i < 3; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        CHECK(simple.P(i, i) == doctest::Approx(1.0 - a[0] / a[ii] * 0.5).epsilon(1e-12));
        for (int j = 0; j < 3; ++j) {
            if (j != i) {
                CHECK(simple.P(i, j) == doctest::Approx(a[0] * 0.5 / (2.0 * a[ii])).epsilon(1e-12));
            }
        }
    }
    CHECK(simple.R(0, 1) == doctest::Approx(0.5));
    CHECK(simple.R(1, 0) == doctest::Approx(0.5));
}

TEST_CASE("family over a grid of parameters")
{
    std::mt19937_64 rng(11);
    for (int k = 3; k <= 6; ++k) {
        for (int rep = 0; rep < 5; ++rep) {
            const StarConfig c = validate_star_config(k, random_alpha(k, rng));
            for (int a = 0; a < 5; ++a) {
                const double delta = 1.0 / (k - 1) + (1.0 - 1.0 / (k - 1)) * a / 4.0;
                const double g0 = gamma_min(k, delta);
                for (int b = 0; b < 5; ++b) {
                    const double gamma = g0 + (1.0 - g0) * b / 4.0;
                    PRPair pr;
                    try {
                        pr = family_delta_gamma(c, delta, gamma);
                    } catch (const NumericalError&) {
                        // some random weights put p outside [0, 1]; the library must say so
                        continue;
                    }
                    CHECK(max_row_sum_error(pr.P) <= 1e-12);
                    CHECK(max_row_sum_error(pr.R) <= 1e-12);
                    CHECK(pr.P.minCoeff() >= -1e-12);
                    CHECK(balance_by_hand(pr.P, pr.R, c.alpha) <= 1e-12);
                    CHECK(check_balance(pr.P, pr.R, c) <= 1e-12);
                }
            }
        }
    }
}

TEST_CASE("family parameter errors")
{
    const StarConfig c = testing_support::config_235();
    CHECK_THROWS_AS(family_delta_gamma(c, 0.4, 0.9), ParameterError);
    CHECK_THROWS_AS(family_delta_gamma(c, 1.0, 0.5), ParameterError);
    CHECK_THROWS_AS(family_delta_gamma(c, 0.5, 1.5), ParameterError);
}

TEST_CASE("ergodic projection")
{
    Matrix P(2, 2);
    P << 0.7, 0.3, 0.1, 0.9;
    auto lim = ergodic_projection(P, 1e-12, 10000);
    // stationary vector of the two-state chain by hand
    CHECK(lim.Pi(0, 0) == doctest::Approx(0.25).epsilon(1e-10));
    CHECK(lim.Pi(1, 1) == doctest::Approx(0.75).epsilon(1e-10));

    try {
        ergodic_projection(Matrix::Identity(3, 3), 1e-10, 500);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("no convergence") != std::string::npos);
    }

    const StarConfig c = testing_support::config_235();
    const MatrixSet m = make_family_matrix_set(c, 0.5, 0.8);
    auto fam = ergodic_projection(m.P, 1e-10, 10000, &c.alpha);
    CHECK(fam.matches_alpha);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            CHECK(std::abs(fam.Pi(i, j) - c.alpha[static_cast<std::size_t>(j)]) <= 1e-9);
        }
    }
}

TEST_CASE("resolvent of P - I")
{
    Matrix P(3, 3);
    P << 0.2, 0.5, 0.3, 0.1, 0.1, 0.8, 0.6, 0.3, 0.1;
    CHECK(resolvent_P(P, 0.5, RowVector::Zero(3)).cwiseAbs().maxCoeff() == 0.0);
    const RowVector ones = RowVector::Ones(3);
    CHECK((resolvent_P(Matrix::Identity(3, 3), 1.0, ones) - ones).cwiseAbs().maxCoeff() <= 1e-15);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        Matrix S(4, 4);
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) {
                S(i, j) = u(rng);
            }
            S.row(i) /= S.row(i).sum();
        }
        RowVector eta(4);
        for (int j = 0; j < 4; ++j) {
            eta(j) = u(rng) - 0.5;
        }
        const RowVector xi = resolvent_P(S, 0.5, eta);
        CHECK((1.5 * xi - xi * S - eta).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("symmetric matrix exponential")
{
    Matrix M(2, 2);
    M << -1, 1, 1, -1;
    CHECK((sym_expm(M, 0.0) - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-15);
    for (double t : {0.1, 0.7, 2.5}) {
        const double e = std::exp(-2.0 * t);
        Matrix expect(2, 2);
        expect << (1 + e) / 2, (1 - e) / 2, (1 - e) / 2, (1 + e) / 2;
        CHECK((sym_expm(M, t) - expect).cwiseAbs().maxCoeff() <= 1e-14);
    }

    for (int k = 2; k <= 5; ++k) {
        std::vector<double> a(static_cast<std::size_t>(k), 1.0 / k);
        a.back() = 1.0 - (k - 1) * (1.0 / k);
        auto Q = build_default_Q(validate_star_config(k, a));
        const Matrix far = sym_expm(Q[0], 40.0);
        CHECK((far.array() - 1.0 / k).abs().maxCoeff() <= 1e-12);
        const Matrix ab = sym_expm(Q[0], 0.3) * sym_expm(Q[0], 0.45);
        CHECK((ab - sym_expm(Q[0], 0.75)).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((sym_expm(Q[0], 0.3).rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-10);
    }

    Matrix N(2, 2);
    N << 0, 1, 2, 0;
    CHECK_THROWS_AS(sym_expm(N, 1.0), ParameterError);
}

TEST_CASE("trimmed intensities")
{
    const std::vector<double> a2{0.5, 0.5};
    auto Q2 = build_default_Q(validate_star_config(2, a2));
    auto t2 = trim_Q(Q2[0], 0);
    CHECK(t2.Qt.rows() == 1);
    CHECK(t2.Qt(0, 0) == 0.0);

    auto Q3 = build_default_Q(testing_support::config_235());
    auto t3 = trim_Q(Q3[0], 0);
    Matrix expect(2, 2);
    expect << -1, 1, 1, -1;
    CHECK(t3.Qt == expect);
    CHECK_THROWS_AS(trim_Q(Q3[0], 3), ParameterError);

    for (int k = 3; k <= 6; ++k) {
        std::vector<double> a(static_cast<std::size_t>(k), 1.0 / k);
        a.back() = 1.0 - (k - 1) * (1.0 / k);
        auto Q = build_default_Q(validate_star_config(k, a));
        for (int j = 0; j < k; ++j) {
            const Matrix p = sym_expm(trim_Q(Q[static_cast<std::size_t>(j)], j).Qt, 1.3);
            CHECK((p.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-10);
            CHECK((p.colwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-10);
        }
    }
}

TEST_CASE("matrix set validation and JSON round trip")
{
    const StarConfig c = testing_support::config_235();
    const MatrixSet m = make_family_matrix_set(c, 0.5, 0.8);
    CHECK_NOTHROW(validate_matrix_set(m, c));

    const auto loaded = matrix_set_from_json(matrix_set_to_json(m, c));
    CHECK(loaded.config.alpha == c.alpha);
    CHECK((loaded.mats.P - m.P).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.mats.R - m.R).cwiseAbs().maxCoeff() == 0.0);

    MatrixSet bad = m;
    bad.R(0, 0) = 0.1;
    CHECK_THROWS_AS(validate_matrix_set(bad, c), ParameterError);
    bad = m;
    bad.Q[1](1, 0) = 2.0;
    CHECK_THROWS_AS(validate_matrix_set(bad, c), ParameterError);

    CHECK_THROWS_AS(matrix_set_from_json("{not json"), IoError);
    CHECK_THROWS_AS(read_matrix_set("/nonexistent/matrices.json"), IoError);
}

TEST_CASE("two-edge constructor")
{
    const std::vector<double> a{0.25, 0.75};
    const StarConfig c = validate_star_config(2, a);
    auto pr = two_edge_family(c, 0.3);
    CHECK(pr.R(0, 1) == 1.0);
    CHECK(pr.R(1, 0) == 1.0);
    CHECK(check_balance(pr.P, pr.R, c) <= 1e-15);
    CHECK(max_row_sum_error(pr.P) <= 1e-15);
}
