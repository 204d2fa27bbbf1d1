#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "spider/matrices.hpp"
#include "spider/model.hpp"
#include "spider/semigroup.hpp"

namespace spider {

// One particle of the scaled transport process. It moves towards the center
// (speed (k-1)/eps) iff copy == edge, outwards (speed 1/eps) otherwise.
struct ParticleState {
    double x = 0.0;
    int copy = 0;
    int edge = 0;
    double clock = 0.0;
};

// Particle counts per cell of every (copy, edge) component, plus one overflow
// bucket per component for positions at or beyond L.
struct Histogram {
    StarConfig config;
    Grid grid;
    std::vector<std::uint64_t> counts;    // layout [(i k + j) n_cells + n]
    std::vector<std::uint64_t> overflow;  // layout [i k + j]
    std::uint64_t n_particles = 0;

    static Histogram empty(const StarConfig& config, const Grid& grid);

    void add(const ParticleState& p);
    void merge(const Histogram& other);
    [[nodiscard]] std::uint64_t total() const;

    // counts / (n h); overflow becomes leaked_mass
    [[nodiscard]] GridDensity to_density() const;

    friend bool operator==(const Histogram&, const Histogram&) = default;
};

// Draws starting states from a piecewise-constant density (leaked mass ignored).
class DensitySampler {
public:
    explicit DensitySampler(const GridDensity& phi);
    ParticleState operator()(std::mt19937_64& rng) const;

private:
    GridDensity phi_;
    std::vector<double> cumulative_;
};

struct SimulationOptions {
    std::uint64_t n_particles = 0;
    double t = 0.0;
    double eps = 0.0;
    std::uint64_t seed = 0;
    unsigned threads = 0;  // 0: SPIDER_THREADS or hardware concurrency
};

// Exact event-driven simulation up to time t; the result does not depend on the thread count.
Histogram simulate(const SimulationOptions& opts, const MatrixSet& mats, const DensitySampler& init,
                   const Grid& grid, const StarConfig& config);

// Advances one particle to time t (used by simulate and by tests).
void advance_particle(ParticleState& p, double t, double eps, const MatrixSet& mats, std::mt19937_64& rng);

// Independent stream for particle `index`.
std::mt19937_64 particle_rng(std::uint64_t seed, std::uint64_t index);

// Uniform on (0, 1] from 53 random bits.
double uniform_open0(std::mt19937_64& rng);

double l1_distance(const Histogram& a, const GridDensity& b);

// Thread count from SPIDER_THREADS, falling back to hardware concurrency.
unsigned default_thread_count();

inline constexpr const char* kHistogramSchema = "spider.histogram/1";

// Same layout as the density CSV plus count and overflow columns.
void write_histogram(std::ostream& out, const Histogram& hist, const std::string& manifest = {});
void write_histogram(const std::string& path, const Histogram& hist, const std::string& manifest = {});

}  // namespace spider
