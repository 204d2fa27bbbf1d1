// spider-cli: experiment runner. Exit codes: 0 ok, 2 bad parameters, 3 tolerance failure, 4 I/O.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "CLI11.hpp"
#include "json.hpp"

#include "spider/error.hpp"
#include "spider/matrices.hpp"
#include "spider/pdmp.hpp"
#include "spider/semigroup.hpp"
#include "spider/spectral.hpp"
#include "spider/walsh.hpp"

#ifndef SPIDER_VERSION
#define SPIDER_VERSION "unknown"
#endif

using namespace spider;
using json = nlohmann::json;

namespace {

constexpr int kExitParameter = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

// JSON config files. Top-level keys go to the selected subcommand; an object
// keyed by a subcommand name targets that subcommand only.
class JsonConfig : public CLI::Config {
public:
    explicit JsonConfig(const CLI::App* app) : app_(app) {}

    std::string to_config(const CLI::App* app, bool, bool, std::string) const override
    {
        json out = json::object();
        for (const CLI::Option* opt : app->get_options()) {
            if (opt->count() > 0 && !opt->get_lnames().empty()) {
                out[opt->get_lnames().front()] = opt->results();
            }
        }
        return out.dump(2);
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& in) const override
    {
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::exception& e) {
            throw CLI::ConversionError("config file is not valid JSON: " + std::string(e.what()));
        }
        if (!doc.is_object()) {
            throw CLI::ConversionError("config file must hold a JSON object");
        }
        std::vector<std::string> active;
        for (const CLI::App* sub : app_->get_subcommands()) {
            active.push_back(sub->get_name());
        }
        std::vector<CLI::ConfigItem> items;
        for (const auto& [key, value] : doc.items()) {
            if (value.is_object()) {
                for (const auto& [inner, v] : value.items()) {
                    items.push_back(CLI::ConfigItem{{key}, inner, inputs(v)});
                }
            } else {
                items.push_back(CLI::ConfigItem{active, key, inputs(value)});
            }
        }
        return items;
    }

private:
    static std::vector<std::string> inputs(const json& v)
    {
        std::vector<std::string> out;
        auto one = [&](const json& x) { out.push_back(x.is_string() ? x.get<std::string>() : x.dump()); };
        if (v.is_array()) {
            for (const auto& x : v) {
                one(x);
            }
        } else {
            one(v);
        }
        return out;
    }

    const CLI::App* app_;
};

// Command, parameters, seed, version, duration and leak totals of one run.
struct RunManifest {
    std::string command;
    json parameters = json::object();
    std::uint64_t seed = 0;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    json leak = json::object();

    [[nodiscard]] json finish() const
    {
        json m;
        m["command"] = command;
        m["parameters"] = parameters;
        m["seed"] = seed;
        m["version"] = SPIDER_VERSION;
        m["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        m["leak"] = leak;
        return m;
    }
};

json collect_parameters(const CLI::App* sub)
{
    json p = json::object();
    for (const CLI::Option* opt : sub->get_options()) {
        if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") {
            continue;
        }
        const auto& name = opt->get_lnames().front();
        if (opt->count() > 0) {
            const auto& r = opt->results();
            p[name] = r.size() == 1 ? json(r.front()) : json(r);
        } else if (!opt->get_default_str().empty()) {
            p[name] = opt->get_default_str();
        }
    }
    return p;
}

// CSV (or JSON) goes to --out or stdout; with --out the manifest is also written next to it.
struct Output {
    std::string path;

    void write(const std::string& body, const json& manifest) const
    {
        if (path.empty() || path == "-") {
            std::cout << body;
            std::cout.flush();
            return;
        }
        std::ofstream out(path);
        if (!out) {
            throw IoError("cannot open " + path + " for writing");
        }
        out << body;
        std::ofstream m(path + ".manifest.json");
        if (!m) {
            throw IoError("cannot open " + path + ".manifest.json for writing");
        }
        m << manifest.dump(2) << '\n';
    }
};

std::string csv_preamble(const std::string& schema, const json& manifest)
{
    return "# schema: " + schema + "\n# manifest: " + manifest.dump() + "\n";
}

std::string num(double x)
{
    std::ostringstream s;
    s.precision(17);
    s << x;
    return s.str();
}

// Matrices from --matrices, otherwise from the (delta, gamma) family.
struct ModelOptions {
    std::string matrices;
    int k = 3;
    std::vector<double> alpha{0.2, 0.3, 0.5};
    double delta = 0.5;
    double gamma = 0.8;

    void add(CLI::App* sub, bool with_file = true)
    {
        if (with_file) {
            sub->add_option("--matrices", matrices, "MatrixSet JSON file (overrides the family options)");
        }
        sub->add_option("--k", k, "number of edges");
        sub->add_option("--alpha", alpha, "edge weights, comma separated")->delimiter(',');
        sub->add_option("--delta", delta, "family parameter delta (ignored for k = 2)");
        sub->add_option("--gamma", gamma, "family parameter gamma");
    }

    [[nodiscard]] StarConfig config() const { return validate_star_config(k, alpha); }

    [[nodiscard]] LoadedMatrices load() const
    {
        if (!matrices.empty()) {
            return read_matrix_set(matrices);
        }
        const StarConfig c = config();
        return LoadedMatrices{c, make_family_matrix_set(c, delta, gamma)};
    }
};

struct GridOptions {
    double h = 1.0 / 256;
    double length = 8.0;
    std::string init = "bump";
    std::string init_file;

    void add(CLI::App* sub)
    {
        sub->add_option("--cell-width", h, "cell width");
        sub->add_option("--length", length, "edge length of the grid window");
        sub->add_option("--init", init, "initial density: bump (copy-constant) or asymmetric (all on copy 0)")
            ->check(CLI::IsMember({"bump", "asymmetric"}));
        sub->add_option("--init-file", init_file, "initial density CSV (overrides --init, --cell-width, --length)");
    }

    [[nodiscard]] GridDensity initial(const StarConfig& config) const
    {
        if (!init_file.empty()) {
            GridDensity phi = read_grid_density(init_file);
            require(phi.k() == config.k, "initial density and matrices disagree on k");
            return phi;
        }
        const Grid g = make_grid_for_length(h, length);
        const GridDensity lumped = embed_J(discretize(bump_profile(config), config, g));
        if (init == "bump") {
            return lumped;
        }
        GridDensity phi = GridDensity::zeros(config, g);
        for (int j = 0; j < config.k; ++j) {
            auto src = lumped.component(0, j);
            auto dst = phi.component(0, j);
            for (std::size_t n = 0; n < src.size(); ++n) {
                dst[n] = config.k * src[n];
            }
        }
        return phi;
    }
};

unsigned resolve_threads(unsigned requested)
{
    return requested > 0 ? requested : default_thread_count();
}

// ---- family

int cmd_family(const ModelOptions& mo, const Output& out, RunManifest& man)
{
    const StarConfig c = mo.config();
    const MatrixSet mats = make_family_matrix_set(c, mo.delta, mo.gamma);
    const double balance = check_balance(mats.P, mats.R, c);
    const double rows = (mats.P.rowwise().sum().array() - 1.0).abs().maxCoeff();
    json doc = json::parse(matrix_set_to_json(mats, c));
    doc["balance_residual"] = balance;
    doc["row_sum_error"] = rows;
    if (c.k >= 3) {
        doc["gamma_min"] = gamma_min(c.k, mo.delta);
    }
    const bool ok = balance <= kStochasticTol && rows <= kStochasticTol;
    doc["manifest"] = man.finish();
    out.write(doc.dump(2) + "\n", doc["manifest"]);
    if (!ok) {
        std::cerr << "balance residual " << balance << " exceeds " << kStochasticTol << '\n';
        return kExitNumerical;
    }
    return 0;
}

// ---- converge

struct ConvergeOptions {
    double t = 0.5;
    std::vector<double> eps{0.2, 0.1, 0.05, 0.025};
    std::string scheme = "strang";
    double leak_threshold = 1e-6;
    bool require_decreasing = false;
    unsigned threads = 0;
};

int cmd_converge(const ModelOptions& mo, const GridOptions& go, const ConvergeOptions& co, const Output& out,
                 RunManifest& man)
{
    require(co.t >= 0.0, "converge needs t >= 0");
    require(!co.eps.empty(), "converge needs at least one eps");
    const LoadedMatrices lm = mo.load();
    const GridDensity phi = go.initial(lm.config);
    const SplitScheme scheme = parse_scheme(co.scheme);
    const double speed = 2.0 * (lm.config.k - 1.0) / lm.config.k;
    const GridDensity reference =
        embed_J(evolve_spider(restrict_Jinv(project_P(phi)), speed * co.t));

    std::vector<double> eps = co.eps;
    std::sort(eps.begin(), eps.end(), std::greater<>());
    std::vector<EvolveResult> results(eps.size());
    const unsigned threads = std::min<unsigned>(resolve_threads(co.threads), static_cast<unsigned>(eps.size()));
    auto work = [&](unsigned w) {
        for (std::size_t q = w; q < eps.size(); q += threads) {
            results[q] = evolve_Geps(phi, co.t, eps[q], lm.mats, scheme);
        }
    };
    if (threads <= 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w) {
            pool.emplace_back(work, w);
        }
        for (auto& th : pool) {
            th.join();
        }
    }

    std::string rows = "eps,l1_distance,leak,steps,step,t_rounding\n";
    double worst_leak = reference.leaked_mass;
    double previous = std::numeric_limits<double>::infinity();
    bool decreasing = true;
    json per_eps = json::array();
    for (std::size_t q = 0; q < eps.size(); ++q) {
        const EvolveResult& r = results[q];
        const double d = l1_distance(r.density, reference);
        const double leak = r.density.leaked_mass;
        worst_leak = std::max(worst_leak, leak);
        decreasing = decreasing && d < previous;
        previous = d;
        rows += num(eps[q]) + "," + num(d) + "," + num(leak) + "," + std::to_string(r.steps) + "," + num(r.step) +
                "," + num(r.t_rounding) + "\n";
        per_eps.push_back(leak);
    }
    man.leak["reference"] = reference.leaked_mass;
    man.leak["evolution"] = per_eps;
    const json m = man.finish();
    out.write(csv_preamble("spider.converge/1", m) + rows, m);
    if (worst_leak > co.leak_threshold) {
        std::cerr << "leaked mass " << worst_leak << " above threshold " << co.leak_threshold
                  << "; enlarge --length\n";
        return kExitNumerical;
    }
    if (co.require_decreasing && !decreasing) {
        std::cerr << "distances do not decrease strictly along the eps ladder\n";
        return kExitNumerical;
    }
    return 0;
}

// ---- mc

struct McOptions {
    double t = 0.5;
    double eps = 0.05;
    std::uint64_t n = 100000;
    std::uint64_t seed = 12345;
    std::size_t bin_factor = 32;
    double tolerance = -1.0;
    unsigned threads = 0;
};

int cmd_mc(const ModelOptions& mo, const GridOptions& go, const McOptions& mc, const Output& out, RunManifest& man)
{
    const LoadedMatrices lm = mo.load();
    const GridDensity phi = go.initial(lm.config);
    const GridDensity grid = coarsen(evolve_Geps(phi, mc.t, mc.eps, lm.mats).density, mc.bin_factor);
    const DensitySampler init(phi);
    const SimulationOptions so{mc.n, mc.t, mc.eps, mc.seed, resolve_threads(mc.threads)};
    const Histogram hist = simulate(so, lm.mats, init, grid.grid, lm.config);
    const double d = l1_distance(hist, grid);

    man.seed = mc.seed;
    man.parameters["l1_vs_grid"] = d;
    man.leak["histogram"] = hist.to_density().leaked_mass;
    man.leak["grid"] = grid.leaked_mass;
    const json m = man.finish();
    std::ostringstream body;
    write_histogram(body, hist, m.dump());
    out.write(body.str(), m);
    std::cerr << "l1 distance to the grid evolution: " << num(d) << '\n';
    if (mc.tolerance >= 0.0 && d > mc.tolerance) {
        std::cerr << "above tolerance " << mc.tolerance << '\n';
        return kExitNumerical;
    }
    return 0;
}

// ---- labeled check tables shared by spectral, walsh-check and self-test

struct CheckTable {
    std::string rows = "check,eps,h,value,tolerance,pass\n";
    int failures = 0;

    // kind: "le" value <= tol, "ge" value >= tol
    void add(const std::string& name, double eps, double h, double value, double tol, bool ge = false)
    {
        const bool pass = ge ? value >= tol : value <= tol;
        failures += pass ? 0 : 1;
        rows += name + "," + (eps > 0 ? num(eps) : "") + "," + (h > 0 ? num(h) : "") + "," + num(value) + "," +
                (ge ? ">=" : "<=") + num(tol) + "," + (pass ? "1" : "0") + "\n";
    }
};

int finish_table(const CheckTable& table, const std::string& schema, const Output& out, RunManifest& man)
{
    man.parameters["failures"] = table.failures;
    const json m = man.finish();
    out.write(csv_preamble(schema, m) + table.rows, m);
    if (table.failures > 0) {
        std::cerr << table.failures << " check(s) failed\n";
        return kExitNumerical;
    }
    return 0;
}

bool halves(double a, double b)
{
    return std::abs(a / b - 2.0) < 1e-9;
}

// ---- spectral

struct SpectralOptions {
    double lambda = 1.0;
    std::vector<double> eps{0.2, 0.1, 0.05, 0.025};
    std::uint64_t seed = 2024;
    bool self_test = false;
};

PolyGaussProfile spectral_profile(const StarConfig& c)
{
    // antisymmetric around the middle edge so that both coefficient sets sum to zero
    std::vector<double> b(static_cast<std::size_t>(c.k));
    std::vector<double> cc(b.size());
    for (int j = 0; j < c.k; ++j) {
        const double s = j - (c.k - 1) / 2.0;
        b[static_cast<std::size_t>(j)] = 0.3 * s;
        cc[static_cast<std::size_t>(j)] = -0.1 * s;
    }
    return PolyGaussProfile::in_domain(c, b, cc);
}

void spectral_trivial(CheckTable& table, const StarConfig& c, const MatrixSet& mats, double lambda)
{
    const int k = c.k;
    const Grid g = make_grid(0.25, 16);
    const EigenCoefficients zero = make_eigen_coefficients(lambda, 0.1, Matrix::Zero(k, k), c);
    double z = 0.0;
    for (double v : eigen_kernel(zero, mats, c, g).values) {
        z = std::max(z, std::abs(v));
    }
    table.add("zero_coefficients_zero_kernel", 0.1, g.h, z, 0.0);
    table.add("zero_upsilon_zero_solution", 0.1, 0.0,
              solve_K(lambda, 0.1, BoundaryVector::zeros(k), mats, c).E.cwiseAbs().maxCoeff(), 0.0);
    table.add("F_of_zero", 0.0, 0.0, apply_F(Matrix::Zero(k, k), mats).max_abs(), 0.0);
    table.add("F_alpha_of_zero", 0.0, 0.0,
              F_alpha(std::vector<double>(static_cast<std::size_t>(k), 0.0), mats).max_abs(), 0.0);
    const PolyGaussProfile p = spectral_profile(c);
    const SpiderDensity psi = discretize(p, c, g);
    table.add("chi_at_eps_zero", 0.0, g.h,
              l1_distance(chi_eps(psi, discretize(p, c, g, 1), discretize(p, c, g, 2), 0.0),
                          times_structure(psi, structure_u(k))),
              0.0);
}

int cmd_spectral(const ModelOptions& mo, const SpectralOptions& so, const Output& out, RunManifest& man)
{
    const LoadedMatrices lm = mo.load();
    const StarConfig& c = lm.config;
    const MatrixSet& mats = lm.mats;
    const int k = c.k;
    man.seed = so.seed;
    CheckTable table;
    if (so.self_test) {
        spectral_trivial(table, c, mats, so.lambda);
        return finish_table(table, "spider.checks/1", out, man);
    }
    std::vector<double> eps = so.eps;
    std::sort(eps.begin(), eps.end(), std::greater<>());

    std::mt19937_64 rng(so.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    BoundaryVector ups = BoundaryVector::zeros(k);
    for (double& x : ups.values) {
        x = u(rng);
    }
    Matrix target(k, k);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            target(i, j) = sigma(ups) / mu_zero(so.lambda, c) * c.alpha[static_cast<std::size_t>(j)];
        }
    }

    const PolyGaussProfile p = spectral_profile(c);
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
    table.add("sigma_F_alpha", 0.0, 0.0, std::abs(sigma(fa)), 1e-12);
    const GridDensity proj = project_P(limit);
    const GridDensity d2u = times_structure(d2, structure_u(k));
    double pgap = 0.0;
    for (std::size_t q = 0; q < proj.values.size(); ++q) {
        pgap = std::max(pgap, std::abs(proj.values[q] - (k - 1.0) * d2u.values[q]));
    }
    table.add("projected_generator_limit", 0.0, g.h, pgap, 1e-12);

    const char* limits[] = {"solver_limit", "expansion_error", "generator_error", "boundary_error",
                            "corollary_error"};
    std::vector<std::vector<double>> errors(5);
    for (double e : eps) {
        const MuNu mn = mu_nu(so.lambda, e, c);
        const double lhs = 1.0 / (e * (mn.nu - mn.mu));
        table.add("mu_nu_identity", e, 0.0, std::abs(lhs - (mn.kappa + 1.0)) / lhs, 1e-12);

        const EigenCoefficients co = solve_K(so.lambda, e, ups, mats, c);
        table.add("kernel_constraint", e, 0.0, co.constraint_residual(), 1e-10);
        double trip = 0.0;
        const BoundaryVector back = apply_F(co.E, mats);
        for (std::size_t q = 0; q < back.values.size(); ++q) {
            trip = std::max(trip, std::abs(back.values[q] - ups.values[q]));
        }
        table.add("round_trip", e, 0.0, trip, 1e-10);
        const double back_trip = (solve_K(so.lambda, e, back, mats, c).E - co.E).cwiseAbs().maxCoeff();
        table.add("round_trip_kernel_side", e, 0.0, back_trip, 1e-10);

        double previous = 0.0;
        for (int level = 0; level < 3; ++level) {
            const double h = 1.0 / (64 << level);
            const double r = eigen_ode_residual(eigen_kernel(co, mats, c, make_grid_for_length(h, 8.0)), so.lambda,
                                                e, mats);
            table.add("ode_residual", e, h, r, std::numeric_limits<double>::infinity());
            if (level > 0) {
                table.add("ode_residual_ratio_min", e, h, previous / r, 1.7, true);
                table.add("ode_residual_ratio_max", e, h, previous / r, 2.3);
            }
            previous = r;
        }

        errors[0].push_back((e * co.E - target).cwiseAbs().maxCoeff());
        errors[1].push_back(l1_distance(chi_eps(psi, d1, d2, e), psi_u));
        GridDensity gen = generator_chi_eps(psi, d1, d2, d3, e, mats);
        for (double& x : gen.values) {
            x *= k;
        }
        errors[2].push_back(l1_distance(gen, limit));
        const BoundaryVector f = apply_F(chi_eps_boundary(at0, slope0, curv0, e), mats);
        double be = 0.0;
        for (std::size_t q = 0; q < f.values.size(); ++q) {
            be = std::max(be, std::abs(f.values[q] / e + fa.values[q] / k));
        }
        errors[3].push_back(be);
        errors[4].push_back(solve_K(so.lambda, e, f, mats, c).E.cwiseAbs().maxCoeff());
    }
    for (std::size_t l = 0; l < errors.size(); ++l) {
        for (std::size_t q = 0; q < eps.size(); ++q) {
            table.add(limits[l], eps[q], 0.0, errors[l][q], std::numeric_limits<double>::infinity());
            if (q > 0 && halves(eps[q - 1], eps[q])) {
                table.add(std::string(limits[l]) + "_ratio", eps[q], 0.0, errors[l][q - 1] / errors[l][q], 1.8, true);
            }
        }
    }
    return finish_table(table, "spider.checks/1", out, man);
}

// ---- walsh-check

template <class F>
double half_line(F f)
{
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        f, 0.0, std::numeric_limits<double>::infinity(), 15, 1e-13);
}

struct WalshOptions {
    std::vector<double> times{0.05, 0.5, 2.0};
    std::vector<double> lambdas{0.5, 1.0, 3.0};
    double h = 1.0 / 256;
    double length = 24.0;
    bool self_test = false;
};

int cmd_walsh(const ModelOptions& mo, const WalshOptions& wo, const Output& out, RunManifest& man)
{
    const StarConfig c = mo.config();
    const int k = c.k;
    const Grid g = make_grid_for_length(wo.h, wo.length);
    const SpiderDensity psi = discretize(bump_profile(c), c, g);
    CheckTable table;

    double zero_time = 0.0;
    const SpiderDensity same = evolve_spider(psi, 0.0);
    for (std::size_t q = 0; q < psi.values.size(); ++q) {
        zero_time = std::max(zero_time, std::abs(same.values[q] - psi.values[q]));
    }
    table.add("evolve_at_zero", 0.0, g.h, zero_time, 0.0);
    double round = 0.0;
    const SpiderDensity back = restrict_Jinv(embed_J(psi));
    for (std::size_t q = 0; q < psi.values.size(); ++q) {
        round = std::max(round, std::abs(back.values[q] - psi.values[q]));
    }
    table.add("embedding_round_trip", 0.0, g.h, round, 1e-15);
    if (wo.self_test) {
        double z = 0.0;
        for (double v : resolvent_spider(1.0, SpiderDensity::zeros(c, g)).values) {
            z = std::max(z, std::abs(v));
        }
        table.add("resolvent_of_zero", 0.0, g.h, z, 0.0);
        return finish_table(table, "spider.checks/1", out, man);
    }

    for (double t : wo.times) {
        double mass = 0.0;
        double low = 0.0;
        for (double x : {0.0, 0.4, 1.5}) {
            for (int j = 0; j < k; ++j) {
                double total = 0.0;
                for (int m = 0; m < k; ++m) {
                    total += half_line([&](double y) { return spider_kernel(t, x, j, y, m, c); });
                    for (double y = 0.0; y < 8.0; y += 0.1) {
                        low = std::min(low, spider_kernel(t, x, j, y, m, c));
                    }
                }
                mass = std::max(mass, std::abs(total - 1.0));
            }
        }
        table.add("kernel_mass_t" + num(t), 0.0, 0.0, mass, 1e-8);
        table.add("kernel_negative_part_t" + num(t), 0.0, 0.0, -low, 0.0);
        const SpiderDensity ev = evolve_spider(psi, t);
        table.add("evolve_mass_t" + num(t), 0.0, g.h, std::abs(ev.total_mass() - psi.total_mass()), 1e-8);
        table.add("evolve_weight_spread_t" + num(t), 0.0, g.h, spider_boundary(ev).weight_spread, 5.0 * g.h);
    }
    // Chapman-Kolmogorov at a few points
    double ck = 0.0;
    for (int j = 0; j < k; ++j) {
        for (int m = 0; m < k; ++m) {
            double composed = 0.0;
            for (int l = 0; l < k; ++l) {
                composed += half_line(
                    [&](double z) { return spider_kernel(0.3, 0.4, j, z, l, c) * spider_kernel(0.5, z, l, 0.9, m, c); });
            }
            ck = std::max(ck, std::abs(composed - spider_kernel(0.8, 0.4, j, 0.9, m, c)));
        }
    }
    table.add("chapman_kolmogorov", 0.0, 0.0, ck, 1e-10);
    for (double lambda : wo.lambdas) {
        const SpiderDensity r = resolvent_spider(lambda, psi);
        table.add("resolvent_mass_lambda" + num(lambda), 0.0, g.h, std::abs(lambda * r.mass() - psi.mass()), 1e-8);
        table.add("resolvent_negative_part_lambda" + num(lambda), 0.0, g.h, std::max(0.0, -r.min_value()), 0.0);
    }
    return finish_table(table, "spider.checks/1", out, man);
}

// ---- self-test

int cmd_self_test(const ModelOptions& mo, const Output& out, RunManifest& man)
{
    const LoadedMatrices lm = mo.load();
    const StarConfig& c = lm.config;
    const MatrixSet& mats = lm.mats;
    CheckTable table;
    table.add("balance", 0.0, 0.0, check_balance(mats.P, mats.R, c), 1e-12);
    double qrows = 0.0;
    for (const Matrix& q : mats.Q) {
        qrows = std::max(qrows, q.rowwise().sum().cwiseAbs().maxCoeff());
    }
    table.add("intensity_row_sums", 0.0, 0.0, qrows, 1e-14);

    const Grid g = make_grid(1.0 / 16, 64);
    const GridDensity phi = embed_J(discretize(bump_profile(c), c, g));
    table.add("transport_zero_steps", 0.0, g.h, l1_distance(transport_T(phi, 0, mats), phi), 0.0);
    table.add("evolve_zero_time", 0.1, g.h, l1_distance(evolve_Geps(phi, 0.0, 0.1, mats).density, phi), 0.0);
    table.add("projection_fixed_point", 0.0, g.h, l1_distance(project_P(phi), phi), 1e-14);
    const GridDensity evolved = evolve_Geps(phi, 0.2, 0.2, mats).density;
    table.add("evolve_mass", 0.2, g.h, std::abs(evolved.total_mass() - phi.total_mass()), 1e-8);
    table.add("evolve_negative_part", 0.2, g.h, std::max(0.0, -evolved.min_value()), 0.0);

    const DensitySampler init(phi);
    const Histogram h = simulate(SimulationOptions{2000, 0.0, 0.1, 1, 1}, mats, init, g, c);
    table.add("histogram_total", 0.0, g.h, std::abs(static_cast<double>(h.total()) - 2000.0), 0.0);
    const Histogram h2 = simulate(SimulationOptions{2000, 0.3, 0.1, 1, 3}, mats, init, g, c);
    const Histogram h1 = simulate(SimulationOptions{2000, 0.3, 0.1, 1, 1}, mats, init, g, c);
    table.add("threads_identical", 0.1, g.h, h1 == h2 ? 0.0 : 1.0, 0.0);
    spectral_trivial(table, c, mats, 1.0);
    return finish_table(table, "spider.checks/1", out, man);
}

int run(int argc, char** argv)
{
    CLI::App app{"Scaled transport on copies of a star graph and its Walsh spider limit"};
    app.footer(
        "Exit codes: 0 ok, 2 parameter error, 3 numerical tolerance failure, 4 I/O error.\n"
        "SPIDER_THREADS overrides the default thread count.\n"
        "--config takes a JSON object; command-line flags win over its entries.");
    app.require_subcommand(1);
    app.fallthrough();
    app.config_formatter(std::make_shared<JsonConfig>(&app));
    app.set_config("--config", "", "JSON configuration file");

    std::string out_path;
    ModelOptions mo;
    GridOptions go;
    ConvergeOptions co;
    McOptions mc;
    SpectralOptions so;
    WalshOptions wo;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--out", out_path, "output file (default stdout); a .manifest.json is written next to it");
        sub->option_defaults()->always_capture_default();
    };

    CLI::App* family = app.add_subcommand("family", "balanced (P, R) from the (delta, gamma) family as JSON");
    family->option_defaults()->always_capture_default();
    mo.add(family, false);
    common(family);

    CLI::App* converge = app.add_subcommand("converge", "L1 distance to the spider limit along an eps ladder");
    converge->option_defaults()->always_capture_default();
    mo.add(converge);
    go.add(converge);
    converge->add_option("--t", co.t, "time");
    converge->add_option("--eps", co.eps, "eps ladder, comma separated")->delimiter(',');
    converge->add_option("--scheme", co.scheme, "splitting scheme")->check(CLI::IsMember({"strang", "lie"}));
    converge->add_option("--leak-threshold", co.leak_threshold, "largest tolerated leaked mass");
    converge->add_flag("--require-decreasing", co.require_decreasing, "fail unless distances strictly decrease");
    converge->add_option("--threads", co.threads, "worker threads (0: SPIDER_THREADS or all cores)");
    common(converge);

    CLI::App* mcc = app.add_subcommand("mc", "particle simulation, histogram CSV and L1 against the grid");
    mcc->option_defaults()->always_capture_default();
    mo.add(mcc);
    go.add(mcc);
    mcc->add_option("--t", mc.t, "time");
    mcc->add_option("--eps", mc.eps, "eps");
    mcc->add_option("--n", mc.n, "number of particles");
    mcc->add_option("--seed", mc.seed, "seed");
    mcc->add_option("--bin-factor", mc.bin_factor, "histogram bin width in grid cells");
    mcc->add_option("--tolerance", mc.tolerance, "fail if the L1 distance exceeds this (negative: off)");
    mcc->add_option("--threads", mc.threads, "worker threads (0: SPIDER_THREADS or all cores)");
    common(mcc);

    CLI::App* spectral = app.add_subcommand("spectral", "kernel, functional and solver checks along an eps ladder");
    spectral->option_defaults()->always_capture_default();
    mo.add(spectral);
    spectral->add_option("--lambda", so.lambda, "lambda");
    spectral->add_option("--eps", so.eps, "eps ladder, comma separated")->delimiter(',');
    spectral->add_option("--seed", so.seed, "seed for the random boundary vector");
    spectral->add_flag("--self-test", so.self_test, "only the trivial cases");
    common(spectral);

    CLI::App* walsh = app.add_subcommand("walsh-check", "spider kernel, evolution and resolvent checks");
    walsh->option_defaults()->always_capture_default();
    mo.add(walsh, false);
    walsh->add_option("--times", wo.times, "kernel times, comma separated")->delimiter(',');
    walsh->add_option("--lambdas", wo.lambdas, "resolvent parameters, comma separated")->delimiter(',');
    walsh->add_option("--cell-width", wo.h, "cell width");
    walsh->add_option("--length", wo.length, "edge length of the grid window");
    walsh->add_flag("--self-test", wo.self_test, "only the trivial cases");
    common(walsh);

    CLI::App* self = app.add_subcommand("self-test", "quick trivial-case checks of every module");
    self->option_defaults()->always_capture_default();
    mo.add(self);
    common(self);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::FileError& e) {
        app.exit(e);
        return kExitIo;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitParameter;
    }

    CLI::App* sub = app.get_subcommands().front();
    RunManifest man;
    man.command = sub->get_name();
    man.parameters = collect_parameters(sub);
    const Output out{out_path};
    if (sub == family) {
        return cmd_family(mo, out, man);
    }
    if (sub == converge) {
        return cmd_converge(mo, go, co, out, man);
    }
    if (sub == mcc) {
        return cmd_mc(mo, go, mc, out, man);
    }
    if (sub == spectral) {
        return cmd_spectral(mo, so, out, man);
    }
    if (sub == walsh) {
        return cmd_walsh(mo, wo, out, man);
    }
    return cmd_self_test(mo, out, man);
}

}  // namespace

int main(int argc, char** argv)
{
    try {
        return run(argc, argv);
    } catch (const ParameterError& e) {
        std::cerr << "parameter error: " << e.what() << '\n';
        return kExitParameter;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kExitIo;
    }
}
