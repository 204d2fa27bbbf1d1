#include "spider/pdmp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <thread>

#include "json.hpp"

#include "spider/error.hpp"

namespace spider {

Histogram Histogram::empty(const StarConfig& config, const Grid& grid)
{
    Histogram h;
    h.config = config;
    h.grid = grid;
    const auto kk = static_cast<std::size_t>(config.k * config.k);
    h.counts.assign(kk * grid.n_cells, 0);
    h.overflow.assign(kk, 0);
    return h;
}

void Histogram::add(const ParticleState& p)
{
    const auto comp = static_cast<std::size_t>(p.copy * config.k + p.edge);
    const double cell = std::floor(p.x / grid.h);
    if (cell >= static_cast<double>(grid.n_cells)) {
        ++overflow[comp];
    } else {
        ++counts[comp * grid.n_cells + static_cast<std::size_t>(std::max(0.0, cell))];
    }
    ++n_particles;
}

void Histogram::merge(const Histogram& other)
{
    require(other.counts.size() == counts.size(), "histogram shapes differ");
    for (std::size_t q = 0; q < counts.size(); ++q) {
        counts[q] += other.counts[q];
    }
    for (std::size_t q = 0; q < overflow.size(); ++q) {
        overflow[q] += other.overflow[q];
    }
    n_particles += other.n_particles;
}

std::uint64_t Histogram::total() const
{
    std::uint64_t s = 0;
    for (auto c : counts) {
        s += c;
    }
    for (auto c : overflow) {
        s += c;
    }
    return s;
}

GridDensity Histogram::to_density() const
{
    GridDensity phi = GridDensity::zeros(config, grid);
    if (n_particles == 0) {
        return phi;
    }
    const double n = static_cast<double>(n_particles);
    for (std::size_t q = 0; q < counts.size(); ++q) {
        phi.values[q] = static_cast<double>(counts[q]) / (n * grid.h);
    }
    std::uint64_t over = 0;
    for (auto c : overflow) {
        over += c;
    }
    phi.leaked_mass = static_cast<double>(over) / n;
    return phi;
}

double uniform_open0(std::mt19937_64& rng)
{
    return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

std::mt19937_64 particle_rng(std::uint64_t seed, std::uint64_t index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

DensitySampler::DensitySampler(const GridDensity& phi) : phi_(phi)
{
    require(phi.min_value() >= 0.0, "initial density must be nonnegative");
    cumulative_.resize(phi.values.size());
    double acc = 0.0;
    for (std::size_t q = 0; q < phi.values.size(); ++q) {
        acc += phi.values[q];
        cumulative_[q] = acc;
    }
    require(acc > 0.0, "initial density has no mass on the grid");
}

ParticleState DensitySampler::operator()(std::mt19937_64& rng) const
{
    const double target = uniform_open0(rng) * cumulative_.back();
    auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), target);
    auto q = static_cast<std::size_t>(it - cumulative_.begin());
    q = std::min(q, cumulative_.size() - 1);
    while (phi_.values[q] == 0.0 && q > 0) {
        --q;
    }
    const std::size_t N = phi_.n_cells();
    const auto comp = static_cast<int>(q / N);
    const std::size_t n = q % N;
    ParticleState p;
    p.copy = comp / phi_.k();
    p.edge = comp % phi_.k();
    p.x = phi_.grid.h * (static_cast<double>(n) + 1.0 - uniform_open0(rng));
    return p;
}

namespace {

// Index drawn with probability proportional to weights[c], c != skip.
int draw_from_row(const Eigen::Ref<const RowVector>& weights, int skip, std::mt19937_64& rng)
{
    double total = 0.0;
    for (int c = 0; c < weights.size(); ++c) {
        if (c != skip) {
            total += weights(c);
        }
    }
    const double target = uniform_open0(rng) * total;
    double acc = 0.0;
    int last = -1;
    for (int c = 0; c < weights.size(); ++c) {
        if (c == skip || weights(c) <= 0.0) {
            continue;
        }
        acc += weights(c);
        last = c;
        if (target <= acc) {
            return c;
        }
    }
    if (last < 0) {
        throw NumericalError("no admissible target in a transition row");
    }
    return last;
}

}  // namespace

void advance_particle(ParticleState& p, double t, double eps, const MatrixSet& mats, std::mt19937_64& rng)
{
    const double inward = (mats.k() - 1) / eps;
    const double outward = 1.0 / eps;
    const double inf = std::numeric_limits<double>::infinity();
    while (p.clock < t) {
        const Matrix& Q = mats.Q[static_cast<std::size_t>(p.edge)];
        const double rate = -Q(p.copy, p.copy) / (eps * eps);
        const double dt_jump = rate > 0.0 ? -std::log(uniform_open0(rng)) / rate : inf;
        const bool towards = p.copy == p.edge;
        const double dt_center = towards ? p.x / inward : inf;
        const double remaining = t - p.clock;
        const double dt = std::min(dt_jump, dt_center);
        if (dt >= remaining) {
            p.x = towards ? std::max(0.0, p.x - inward * remaining) : p.x + outward * remaining;
            p.clock = t;
            break;
        }
        p.clock += dt;
        if (dt_center <= dt_jump) {
            p.x = 0.0;
            const int i = p.copy;
            const double u = uniform_open0(rng);
            // row i of P: p_ii keeps the edge and switches copy via R, p_im switches edge
            if (u <= mats.P(i, i)) {
                p.copy = draw_from_row(mats.R.row(i), i, rng);
            } else {
                p.edge = draw_from_row(mats.P.row(i), i, rng);
            }
        } else {
            p.x = towards ? std::max(0.0, p.x - inward * dt) : p.x + outward * dt;
            p.copy = draw_from_row(Q.row(p.copy), p.copy, rng);
        }
    }
}

unsigned default_thread_count()
{
    if (const char* env = std::getenv("SPIDER_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) {
            return static_cast<unsigned>(n);
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

Histogram simulate(const SimulationOptions& opts, const MatrixSet& mats, const DensitySampler& init,
                   const Grid& grid, const StarConfig& config)
{
    require(opts.n_particles > 0, "simulation needs a positive number of particles");
    require(opts.t >= 0.0, "simulation needs t >= 0");
    require(opts.eps > 0.0, "simulation needs eps > 0");
    require(mats.k() == config.k, "matrix set and config disagree on k");

    const unsigned threads =
        static_cast<unsigned>(std::min<std::uint64_t>(opts.threads ? opts.threads : default_thread_count(),
                                                      opts.n_particles));
    std::vector<Histogram> partial(threads, Histogram::empty(config, grid));
    auto work = [&](unsigned w) {
        const std::uint64_t begin = opts.n_particles * w / threads;
        const std::uint64_t end = opts.n_particles * (w + 1) / threads;
        for (std::uint64_t idx = begin; idx < end; ++idx) {
            auto rng = particle_rng(opts.seed, idx);
            ParticleState p = init(rng);
            advance_particle(p, opts.t, opts.eps, mats, rng);
            partial[w].add(p);
        }
    };
    if (threads == 1) {
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
    Histogram out = Histogram::empty(config, grid);
    for (const auto& part : partial) {
        out.merge(part);
    }
    return out;
}

double l1_distance(const Histogram& a, const GridDensity& b)
{
    return l1_distance(a.to_density(), b);
}

void write_histogram(std::ostream& out, const Histogram& hist, const std::string& manifest)
{
    const GridDensity phi = hist.to_density();
    nlohmann::json header;
    header["k"] = hist.config.k;
    header["h"] = hist.grid.h;
    header["n_cells"] = hist.grid.n_cells;
    header["n_particles"] = hist.n_particles;
    header["leaked_mass"] = phi.leaked_mass;
    header["alpha"] = hist.config.alpha;
    header["edge_labels"] = hist.config.order;

    out << "# schema: " << kHistogramSchema << '\n';
    out << "# header: " << header.dump() << '\n';
    if (!manifest.empty()) {
        out << "# manifest: " << manifest << '\n';
    }
    out << "i,j,cell,value,count,overflow\n";
    out.precision(17);
    const int k = hist.config.k;
    const std::size_t N = hist.grid.n_cells;
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            const auto comp = static_cast<std::size_t>(i * k + j);
            for (std::size_t n = 0; n < N; ++n) {
                out << i << ',' << j << ',' << n << ',' << phi.values[comp * N + n] << ','
                    << hist.counts[comp * N + n] << ',' << hist.overflow[comp] << '\n';
            }
        }
    }
}

void write_histogram(const std::string& path, const Histogram& hist, const std::string& manifest)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open " + path + " for writing");
    }
    write_histogram(out, hist, manifest);
}

}  // namespace spider
