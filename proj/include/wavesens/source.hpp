#pragma once

#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "wavesens/grid.hpp"

namespace wavesens {

/// Point excitation with a windowed sine burst, injected at a single node.
struct SourceSpec {
    NodeIndex node = 0;
    double amplitude = 1.0;  // ψ0
    double frequency = 1.0;  // f [Hz]
    int cycles = 2;          // n_c

    double angular_frequency() const { return 2.0 * std::numbers::pi * frequency; }
    /// Burst length 2π n_c / ω.
    double duration() const { return static_cast<double>(cycles) / frequency; }
};

/// Throws ConfigError if the node is outside the grid or a parameter is not positive.
void validate(const SourceSpec& source, const Grid& grid);

/// ψ0 sin(ωt) sin²(ωt / 2n_c) on [0, 2πn_c/ω], zero afterwards.
double burst_amplitude(double t, const SourceSpec& source);

/**
 * Recording nodes and their traces (sensor-major, N_r × N).
 * Sample j of a trace holds level j + 1.
 */
class SensorArray {
public:
    SensorArray() = default;
    /// Throws ConfigError on duplicate nodes or nodes outside the grid.
    SensorArray(const Grid& grid, std::vector<NodeIndex> nodes);

    std::span<const NodeIndex> nodes() const { return nodes_; }
    std::size_t count() const { return nodes_.size(); }
    std::size_t samples() const { return samples_; }

    void allocate(std::size_t samples);
    std::span<double> trace(std::size_t sensor);
    std::span<const double> trace(std::size_t sensor) const;
    std::span<const double> traces() const { return traces_; }
    std::span<double> traces() { return traces_; }

private:
    std::vector<NodeIndex> nodes_;
    std::size_t samples_ = 0;
    std::vector<double> traces_;
};

/// Sensors every `stride` nodes along a rectangle inset from the boundary (2D).
std::vector<NodeIndex> perimeter_sensors(const Grid& grid, std::size_t inset, std::size_t stride);

}  // namespace wavesens
