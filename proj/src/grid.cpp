#include "wavesens/grid.hpp"

#include <cmath>
#include <string>

#include "wavesens/errors.hpp"

namespace wavesens {

Grid Grid::build(const GridConfig& config) {
    const auto d = config.shape.size();
    if (d < 1 || d > 3) {
        throw ConfigError("grid must have 1, 2 or 3 axes, got " + std::to_string(d));
    }
    if (!(config.spacing > 0.0) || !std::isfinite(config.spacing)) {
        throw ConfigError("grid spacing must be positive and finite");
    }
    Grid g;
    g.dims_ = static_cast<int>(d);
    g.dx_ = config.spacing;
    for (std::size_t a = 0; a < d; ++a) {
        if (config.shape[a] < 3) {
            throw ConfigError("grid axis " + std::to_string(a) + " needs at least 3 nodes, got " +
                              std::to_string(config.shape[a]));
        }
        g.n_[a] = config.shape[a];
    }
    g.stride_ = {1, g.n_[0], g.n_[0] * g.n_[1]};
    g.size_ = g.n_[0] * g.n_[1] * g.n_[2];
    return g;
}

double Grid::cell_volume() const { return std::pow(dx_, dims_); }

std::vector<std::size_t> Grid::shape() const {
    return std::vector<std::size_t>(n_.begin(), n_.begin() + dims_);
}

Coords Grid::coords(NodeIndex idx) const {
    Coords c{};
    c[0] = idx % n_[0];
    idx /= n_[0];
    c[1] = idx % n_[1];
    c[2] = idx / n_[1];
    return c;
}

bool Grid::contains(const Coords& c) const {
    return c[0] < n_[0] && c[1] < n_[1] && c[2] < n_[2];
}

bool Grid::on_boundary(NodeIndex idx) const {
    const auto c = coords(idx);
    for (int a = 0; a < dims_; ++a) {
        if (c[a] == 0 || c[a] + 1 == n_[a]) return true;
    }
    return false;
}

TimeConfig TimeConfig::build(std::size_t steps, double dt) {
    if (steps < 2) throw ConfigError("time.steps must be at least 2");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("time.dt must be positive and finite");
    return TimeConfig{steps, dt};
}

}  // namespace wavesens
