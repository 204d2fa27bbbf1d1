#include "spider/matrices.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "spider/error.hpp"

namespace spider {

namespace {

void check_stochastic(const Matrix& M, const char* name)
{
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
            if (!(M(i, j) >= -kStochasticTol) || !(M(i, j) <= 1.0 + kStochasticTol)) {
                std::ostringstream msg;
                msg << name << "(" << i << "," << j << ") = " << M(i, j) << " is not a probability";
                throw ParameterError(msg.str());
            }
        }
        const double row = M.row(i).sum();
        if (std::abs(row - 1.0) > kStochasticTol) {
            std::ostringstream msg;
            msg.precision(17);
            msg << name << " row " << i << " sums to " << row;
            throw ParameterError(msg.str());
        }
    }
}

bool is_symmetric(const Matrix& M, double tol)
{
    if (M.rows() != M.cols()) {
        return false;
    }
    const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
    return (M - M.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

}  // namespace

std::vector<Matrix> build_default_Q(const StarConfig& config)
{
    const int k = config.k;
    std::vector<Matrix> Q;
    Q.reserve(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
        Matrix Qj = Matrix::Ones(k, k);
        Qj.diagonal().setConstant(-static_cast<double>(k - 1));
        Q.push_back(std::move(Qj));
    }
    return Q;
}

void validate_matrix_set(const MatrixSet& mats, const StarConfig& config)
{
    const int k = config.k;
    require(mats.P.rows() == k && mats.P.cols() == k, "P must be k x k");
    require(mats.R.rows() == k && mats.R.cols() == k, "R must be k x k");
    require(mats.Q.size() == static_cast<std::size_t>(k), "need exactly k intensity matrices");
    check_stochastic(mats.P, "P");
    check_stochastic(mats.R, "R");
    for (int i = 0; i < k; ++i) {
        require(mats.R(i, i) == 0.0, "R must have zero diagonal");
    }
    for (int j = 0; j < k; ++j) {
        const Matrix& Qj = mats.Q[static_cast<std::size_t>(j)];
        const std::string tag = "Q[" + std::to_string(j) + "]";
        require(Qj.rows() == k && Qj.cols() == k, tag + " must be k x k");
        require(is_symmetric(Qj, 1e-14), tag + " must be symmetric");
        for (int a = 0; a < k; ++a) {
            require(std::abs(Qj.row(a).sum()) <= kStochasticTol, tag + " rows must sum to 0");
            for (int b = 0; b < k; ++b) {
                if (a != b) {
                    require(Qj(a, b) >= 0.0, tag + " off-diagonal entries must be nonnegative");
                }
            }
        }
        require(Qj(j, j) == -static_cast<double>(k - 1), tag + " must have q_jj = -(k-1)");
        for (int i = 0; i < k; ++i) {
            if (i != j) {
                require(Qj(j, i) == 1.0, tag + " must have q_ji = 1 for i != j");
            }
        }
    }
}

double check_balance(const Matrix& P, const Matrix& R, const StarConfig& config)
{
    const int k = config.k;
    const double ell = config.ell;
    double worst = 0.0;
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            if (i == j) {
                continue;
            }
            const double lhs = config.alpha[j] * (1.0 - ell * P(j, j) * R(j, i));
            const double rhs = ell * config.alpha[i] * P(i, j);
            worst = std::max(worst, std::abs(lhs - rhs));
        }
    }
    return worst;
}

double gamma_min(int k, double delta)
{
    require(k >= 3, "the (delta, gamma) family needs k >= 3");
    const double kk = k;
    const double lo = 1.0 / (kk - 1.0);
    require(delta >= lo - 1e-15 && delta <= 1.0, "delta must lie in [1/(k-1), 1]");
    return (kk - 1.0) * ((kk - 1.0) * delta - 1.0) / (kk * (kk - 2.0) * delta);
}

PRPair family_delta_gamma(const StarConfig& config, double delta, double gamma)
{
    const int k = config.k;
    const double g0 = gamma_min(k, delta);
    if (gamma < g0 - 1e-15 || gamma > 1.0) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "gamma = " << gamma << " outside [gamma_0, 1] with gamma_0 = " << g0;
        throw ParameterError(msg.str());
    }
    const double kk = k;
    const double l = kk - 1.0;
    const auto& a = config.alpha;

    Matrix R = Matrix::Zero(k, k);
    R(0, 1) = delta;
    for (int j = 2; j < k; ++j) {
        R(0, j) = (1.0 - delta) / (kk - 2.0);
    }
    for (int i = 1; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            if (j != i) {
                R(i, j) = 1.0 / l;
            }
        }
    }

    Matrix P = Matrix::Zero(k, k);
    P(0, 0) = kk * (kk - 2.0) * (1.0 - gamma) / ((l - delta) * l);
    P(1, 1) = 1.0 - (a[0] / a[1]) * ((kk - 2.0) * (delta + 1.0) * gamma - l * delta + 1.0) / (l - delta);
    for (int i = 2; i < k; ++i) {
        P(i, i) = 1.0 - (a[0] / a[static_cast<std::size_t>(i)]) * gamma;
    }
    P(1, 0) = a[0] * (1.0 - l * delta * P(0, 0)) / (a[1] * l);
    for (int i = 2; i < k; ++i) {
        P(i, 0) = a[0] * (1.0 - l / (kk - 2.0) * (1.0 - delta) * P(0, 0)) / (a[static_cast<std::size_t>(i)] * l);
    }
    for (int i = 0; i < k; ++i) {
        for (int j = 1; j < k; ++j) {
            if (i != j) {
                P(i, j) = a[static_cast<std::size_t>(j)] * (1.0 - P(j, j)) / (a[static_cast<std::size_t>(i)] * l);
            }
        }
    }

    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            if (P(i, j) < -kStochasticTol || P(i, j) > 1.0 + kStochasticTol) {
                std::ostringstream msg;
                msg << "family entry P(" << i << "," << j << ") = " << P(i, j)
                    << " outside [0,1] for delta = " << delta << ", gamma = " << gamma;
                throw NumericalError(msg.str());
            }
        }
    }
    return {std::move(P), std::move(R)};
}

PRPair two_edge_family(const StarConfig& config, double gamma)
{
    require(config.k == 2, "two_edge_family needs k = 2");
    require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
    const double ratio = config.alpha[0] / config.alpha[1];
    Matrix P(2, 2);
    P << 1.0 - gamma, gamma, ratio * gamma, 1.0 - ratio * gamma;
    Matrix R(2, 2);
    R << 0.0, 1.0, 1.0, 0.0;
    return {std::move(P), std::move(R)};
}

MatrixSet make_family_matrix_set(const StarConfig& config, double delta, double gamma)
{
    PRPair pr = config.k == 2 ? two_edge_family(config, gamma) : family_delta_gamma(config, delta, gamma);
    MatrixSet mats{std::move(pr.P), std::move(pr.R), build_default_Q(config)};
    validate_matrix_set(mats, config);
    return mats;
}

ErgodicLimit ergodic_projection(const Matrix& P, double tol, int max_n, const std::vector<double>* alpha)
{
    require(P.rows() == P.cols() && P.rows() > 0, "P must be square");
    require(tol > 0.0 && max_n >= 1, "tol must be positive and max_n >= 1");
    Matrix power = P;
    for (int n = 1; n <= max_n; ++n) {
        if (n > 1) {
            power = power * P;
        }
        double spread = 0.0;
        for (Eigen::Index j = 0; j < power.cols(); ++j) {
            spread = std::max(spread, 0.5 * (power.col(j).maxCoeff() - power.col(j).minCoeff()));
        }
        if (spread < tol) {
            ErgodicLimit out;
            out.n_used = n;
            RowVector row = power.colwise().mean();
            out.Pi = row.replicate(P.rows(), 1);
            if (alpha != nullptr && alpha->size() == static_cast<std::size_t>(P.cols())) {
                double dev = 0.0;
                for (Eigen::Index j = 0; j < row.size(); ++j) {
                    dev = std::max(dev, std::abs(row(j) - (*alpha)[static_cast<std::size_t>(j)]));
                }
                out.matches_alpha = dev <= 10.0 * tol;
            }
            return out;
        }
    }
    throw NumericalError("no convergence of P^n within " + std::to_string(max_n) +
                         " steps (chain reducible or periodic)");
}

RowVector resolvent_P(const Matrix& P, double kappa, const RowVector& eta)
{
    require(kappa > 0.0, "kappa must be positive");
    require(eta.size() == P.rows(), "eta has wrong length");
    const Eigen::Index k = P.rows();
    // xi ((kappa + 1) I - P) = eta  <=>  ((kappa + 1) I - P^T) xi^T = eta^T
    Matrix A = (kappa + 1.0) * Matrix::Identity(k, k) - P.transpose();
    Eigen::FullPivLU<Matrix> lu(A);
    if (!lu.isInvertible()) {
        throw NumericalError("resolvent of P - I is singular");
    }
    Vector xi = lu.solve(eta.transpose());
    return xi.transpose();
}

Matrix sym_expm(const Matrix& M, double t)
{
    require(t >= 0.0, "sym_expm needs t >= 0");
    require(is_symmetric(M, 1e-12), "sym_expm needs a symmetric matrix");
    if (t == 0.0) {
        return Matrix::Identity(M.rows(), M.cols());
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(M);
    if (eig.info() != Eigen::Success) {
        throw NumericalError("eigendecomposition failed");
    }
    const Vector expd = (t * eig.eigenvalues().array()).exp().matrix();
    return eig.eigenvectors() * expd.asDiagonal() * eig.eigenvectors().transpose();
}

TrimmedIntensity trim_Q(const Matrix& Qj, int j)
{
    const int k = static_cast<int>(Qj.rows());
    require(j >= 0 && j < k, "edge index out of range");
    require(Qj.cols() == k, "Q must be square");
    TrimmedIntensity out;
    out.base_edge = j;
    out.Qt.resize(k - 1, k - 1);
    for (int a = 0, ra = 0; a < k; ++a) {
        if (a == j) {
            continue;
        }
        for (int b = 0, rb = 0; b < k; ++b) {
            if (b == j) {
                continue;
            }
            out.Qt(ra, rb) = Qj(a, b) + (a == b ? 1.0 : 0.0);
            ++rb;
        }
        ++ra;
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json matrix_to_json(const Matrix& M)
{
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
            row.push_back(M(i, j));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const nlohmann::json& node, int k, const std::string& name)
{
    Matrix M(k, k);
    if (node.is_array() && node.size() == static_cast<std::size_t>(k) && node[0].is_array()) {
        for (int i = 0; i < k; ++i) {
            const auto& row = node[static_cast<std::size_t>(i)];
            require(row.is_array() && row.size() == static_cast<std::size_t>(k), name + " row has wrong length");
            for (int j = 0; j < k; ++j) {
                M(i, j) = row[static_cast<std::size_t>(j)].get<double>();
            }
        }
    } else if (node.is_array() && node.size() == static_cast<std::size_t>(k * k)) {
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
                M(i, j) = node[static_cast<std::size_t>(i * k + j)].get<double>();
            }
        }
    } else {
        throw ParameterError(name + " must be a k x k nested array or a flat row-major array");
    }
    return M;
}

// Reorders rows and columns so that index s refers to user label order[s].
Matrix permute(const Matrix& M, const std::vector<int>& order)
{
    const auto k = static_cast<Eigen::Index>(order.size());
    Matrix out(k, k);
    for (Eigen::Index a = 0; a < k; ++a) {
        for (Eigen::Index b = 0; b < k; ++b) {
            out(a, b) = M(order[static_cast<std::size_t>(a)], order[static_cast<std::size_t>(b)]);
        }
    }
    return out;
}

}  // namespace

std::string matrix_set_to_json(const MatrixSet& mats, const StarConfig& config, int indent)
{
    nlohmann::json doc;
    doc["k"] = config.k;
    doc["alpha"] = config.alpha;
    doc["edge_labels"] = config.order;
    doc["P"] = matrix_to_json(mats.P);
    doc["R"] = matrix_to_json(mats.R);
    doc["Q"] = nlohmann::json::array();
    for (const auto& Qj : mats.Q) {
        doc["Q"].push_back(matrix_to_json(Qj));
    }
    return doc.dump(indent);
}

void write_matrix_set(const std::string& path, const MatrixSet& mats, const StarConfig& config)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open " + path + " for writing");
    }
    out << matrix_set_to_json(mats, config) << '\n';
}

LoadedMatrices matrix_set_from_json(const std::string& text)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed matrix JSON: ") + e.what());
    }
    try {
        require(doc.contains("k") && doc.contains("alpha") && doc.contains("P") && doc.contains("R"),
                "matrix JSON needs k, alpha, P and R");
        const int k = doc.at("k").get<int>();
        const auto alpha = doc.at("alpha").get<std::vector<double>>();
        LoadedMatrices out;
        out.config = validate_star_config(k, alpha);
        const auto& order = out.config.order;

        out.mats.P = permute(matrix_from_json(doc.at("P"), k, "P"), order);
        out.mats.R = permute(matrix_from_json(doc.at("R"), k, "R"), order);
        if (doc.contains("Q")) {
            const auto& qs = doc.at("Q");
            require(qs.is_array() && qs.size() == static_cast<std::size_t>(k), "Q must list k matrices");
            out.mats.Q.resize(static_cast<std::size_t>(k));
            for (int s = 0; s < k; ++s) {
                const int label = order[static_cast<std::size_t>(s)];
                out.mats.Q[static_cast<std::size_t>(s)] =
                    permute(matrix_from_json(qs[static_cast<std::size_t>(label)], k, "Q"), order);
            }
        } else {
            out.mats.Q = build_default_Q(out.config);
        }
        // Labels written by matrix_set_to_json refer to an earlier sort; compose them.
        if (doc.contains("edge_labels")) {
            const auto labels = doc.at("edge_labels").get<std::vector<int>>();
            require(labels.size() == static_cast<std::size_t>(k), "edge_labels has wrong length");
            std::vector<int> composed(order.size());
            for (std::size_t s = 0; s < order.size(); ++s) {
                composed[s] = labels[static_cast<std::size_t>(order[s])];
            }
            out.config.order = composed;
            out.config = validate_star_config(out.config);
        }
        validate_matrix_set(out.mats, out.config);
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("bad matrix JSON field: ") + e.what());
    }
}

LoadedMatrices read_matrix_set(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return matrix_set_from_json(buffer.str());
}

}  // namespace spider
