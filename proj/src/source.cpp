#include "wavesens/source.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "wavesens/errors.hpp"

namespace wavesens {

void validate(const SourceSpec& source, const Grid& grid) {
    if (source.node >= grid.size()) throw ConfigError("source node " + std::to_string(source.node) + " outside grid");
    if (!(source.amplitude > 0.0)) throw ConfigError("source amplitude must be positive");
    if (!(source.frequency > 0.0)) throw ConfigError("source frequency must be positive");
    if (source.cycles < 1) throw ConfigError("source cycle count must be at least 1");
}

double burst_amplitude(double t, const SourceSpec& source) {
    const double omega = source.angular_frequency();
    if (t < 0.0 || omega * t > 2.0 * std::numbers::pi * source.cycles) return 0.0;
    const double envelope = std::sin(omega * t / (2.0 * source.cycles));
    return source.amplitude * std::sin(omega * t) * envelope * envelope;
}

SensorArray::SensorArray(const Grid& grid, std::vector<NodeIndex> nodes) : nodes_(std::move(nodes)) {
    std::set<NodeIndex> seen;
    for (auto n : nodes_) {
        if (n >= grid.size()) throw ConfigError("sensor node " + std::to_string(n) + " outside grid");
        if (!seen.insert(n).second) throw ConfigError("duplicate sensor node " + std::to_string(n));
    }
}

void SensorArray::allocate(std::size_t samples) {
    samples_ = samples;
    traces_.assign(nodes_.size() * samples, 0.0);
}

std::span<double> SensorArray::trace(std::size_t sensor) {
    return std::span<double>(traces_).subspan(sensor * samples_, samples_);
}

std::span<const double> SensorArray::trace(std::size_t sensor) const {
    return std::span<const double>(traces_).subspan(sensor * samples_, samples_);
}

std::vector<NodeIndex> perimeter_sensors(const Grid& grid, std::size_t inset, std::size_t stride) {
    if (grid.dims() != 2) throw ConfigError("perimeter sensor layout needs a 2D grid");
    if (stride == 0) throw ConfigError("sensor stride must be positive");
    const std::size_t n1 = grid.extent(0), n2 = grid.extent(1);
    if (2 * inset + 1 >= std::min(n1, n2)) throw ConfigError("sensor inset too large for grid");
    const std::size_t lo1 = inset, hi1 = n1 - 1 - inset, lo2 = inset, hi2 = n2 - 1 - inset;
    std::vector<NodeIndex> nodes;
    std::set<NodeIndex> seen;
    auto add = [&](std::size_t i, std::size_t j) {
        const auto idx = grid.index({i, j, 0});
        if (seen.insert(idx).second) nodes.push_back(idx);
    };
    for (std::size_t i = lo1; i <= hi1; i += stride) {
        add(i, lo2);
        add(i, hi2);
    }
    for (std::size_t j = lo2; j <= hi2; j += stride) {
        add(lo1, j);
        add(hi1, j);
    }
    return nodes;
}

}  // namespace wavesens
