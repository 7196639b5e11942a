#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace wavesens {

using NodeIndex = std::size_t;
using Coords = std::array<std::size_t, 3>;

struct GridConfig {
    std::vector<std::size_t> shape;  // node counts, x1 first
    double spacing = 0.0;            // uniform on every axis [m]
};

/**
 * Uniform rectilinear grid in 1, 2 or 3 dimensions.
 *
 * Storage order is row-major with x1 varying fastest:
 * index = i1 + n1 * (i2 + n2 * i3). Binary dumps rely on this order.
 */
class Grid {
public:
    Grid() = default;

    /// Validates the config; throws ConfigError for n_i < 3, dims outside
    /// 1..3 or a non-positive spacing.
    static Grid build(const GridConfig& config);

    int dims() const { return dims_; }
    std::size_t extent(int axis) const { return n_[axis]; }
    std::size_t stride(int axis) const { return stride_[axis]; }
    std::size_t size() const { return size_; }
    double spacing() const { return dx_; }
    double length(int axis) const { return static_cast<double>(n_[axis] - 1) * dx_; }
    /// Δx^d, the volume (area, length) represented by one node.
    double cell_volume() const;
    std::vector<std::size_t> shape() const;

    NodeIndex index(const Coords& c) const { return c[0] + stride_[1] * c[1] + stride_[2] * c[2]; }
    Coords coords(NodeIndex idx) const;
    bool contains(const Coords& c) const;
    /// True when the node touches the outer boundary on any axis.
    bool on_boundary(NodeIndex idx) const;

    bool operator==(const Grid& other) const {
        return dims_ == other.dims_ && n_ == other.n_ && dx_ == other.dx_;
    }

private:
    int dims_ = 0;
    Coords n_{1, 1, 1};
    Coords stride_{1, 1, 1};
    std::size_t size_ = 0;
    double dx_ = 0.0;
};

/// Number of time levels N and step size Δt. Levels run 0..N with
/// u^0 = u^1 = 0; the recorded samples are levels 1..N.
struct TimeConfig {
    std::size_t steps = 0;
    double dt = 0.0;

    static TimeConfig build(std::size_t steps, double dt);
    double end_time() const { return static_cast<double>(steps) * dt; }
};

struct CourantReport {
    double courant = 0.0;
    double max_speed = 0.0;
    double limit = 0.0;  // 1/sqrt(d)
    bool stable = true;
};

}  // namespace wavesens
