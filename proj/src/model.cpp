#include "spider/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "spider/error.hpp"

namespace spider {

int StarConfig::sorted_edge(int user_label) const
{
    auto it = std::find(order.begin(), order.end(), user_label);
    require(it != order.end(), "unknown edge label " + std::to_string(user_label));
    return static_cast<int>(it - order.begin());
}

StarConfig validate_star_config(int k, std::span<const double> alpha)
{
    require(k >= 2, "k must be at least 2, got " + std::to_string(k));
    require(alpha.size() == static_cast<std::size_t>(k),
            "expected " + std::to_string(k) + " weights, got " + std::to_string(alpha.size()));

    double sum = 0.0;
    for (std::size_t j = 0; j < alpha.size(); ++j) {
        if (!(alpha[j] > 0.0) || !std::isfinite(alpha[j])) {
            std::ostringstream msg;
            msg << "weight alpha[" << j << "] = " << alpha[j] << " is not positive";
            throw ParameterError(msg.str());
        }
        sum += alpha[j];
    }
    if (std::abs(sum - 1.0) > kSimplexTol) {
        std::ostringstream msg;
        msg.precision(15);
        msg << "weights sum to " << sum << ", expected 1";
        throw ParameterError(msg.str());
    }

    StarConfig config;
    config.k = k;
    config.ell = k - 1;
    config.order.resize(alpha.size());
    std::iota(config.order.begin(), config.order.end(), 0);
    std::stable_sort(config.order.begin(), config.order.end(),
                     [&](int a, int b) { return alpha[a] < alpha[b]; });
    config.alpha.reserve(alpha.size());
    for (int label : config.order) {
        config.alpha.push_back(alpha[static_cast<std::size_t>(label)]);
    }
    return config;
}

StarConfig validate_star_config(const StarConfig& config)
{
    StarConfig checked = validate_star_config(config.k, config.alpha);
    // alpha is already sorted, so the fresh permutation is the identity;
    // keep the caller's labels.
    require(config.order.size() == checked.order.size(), "edge permutation has wrong length");
    std::vector<int> labels = config.order;
    std::sort(labels.begin(), labels.end());
    for (int j = 0; j < config.k; ++j) {
        require(labels[static_cast<std::size_t>(j)] == j, "edge permutation is not a permutation");
    }
    checked.order = config.order;
    return checked;
}

Grid make_grid(double h, std::size_t n_cells)
{
    require(h > 0.0 && std::isfinite(h), "cell width h must be positive");
    require(n_cells >= 2, "grid needs at least 2 cells");
    return Grid{h, n_cells};
}

Grid make_grid_for_length(double h, double length)
{
    require(h > 0.0 && length > 0.0, "grid length and cell width must be positive");
    const double cells = length / h;
    const double rounded = std::round(cells);
    require(std::abs(cells - rounded) <= 1e-9 * std::max(1.0, cells),
            "truncation length must be a multiple of the cell width");
    return make_grid(h, static_cast<std::size_t>(rounded));
}

}  // namespace spider
