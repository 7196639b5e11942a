#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "wavesens/field.hpp"
#include "wavesens/grid.hpp"
#include "wavesens/material.hpp"
#include "wavesens/source.hpp"

namespace wavesens {

/// Nodal force value for one step. Injected without volume division.
struct PointForce {
    NodeIndex node = 0;
    double value = 0.0;
};

/**
 * Per-node stencil coefficients of one material at one (Δt, Δx), in the
 * working precision. Written so that a step reads
 *
 *   u⁺ᵢ = 2uᵢ − u⁻ᵢ + mᵢ Σ_faces wᵢⱼ (uⱼ − uᵢ) + qᵢ fᵢ
 *
 * where wᵢⱼ is the harmonic mean of the face material (γ for the scalar
 * flavor, 2/(ρᵢ+ρⱼ) for the acoustic one). Faces on the outer boundary are
 * absent: the ghost node mirrors the boundary value and material, so its flux
 * vanishes.
 */
template <class T>
class Propagator {
public:
    Propagator(const MaterialModel& material, double dt);

    const Grid& grid() const { return grid_; }
    Flavor flavor() const { return flavor_; }
    double dt() const { return dt_; }

    /// next <- stencil(prev, cur) + sparse forces.
    void step(const Field<T>& prev, const Field<T>& cur, Field<T>& next, std::span<const PointForce> forces) const;
    /// Same with a dense force field (one value per node).
    void step(const Field<T>& prev, const Field<T>& cur, Field<T>& next, const Field<T>& force) const;

    T mass_factor(NodeIndex i) const { return mass_[i]; }
    T force_factor(NodeIndex i) const { return force_[i]; }
    /// Face weight between i and i + e_axis (0 when that face is absent).
    T face_weight(int axis, NodeIndex i) const { return face_[axis][i]; }

private:
    void apply_stencil(const Field<T>& prev, const Field<T>& cur, Field<T>& next) const;

    Grid grid_;
    Flavor flavor_;
    double dt_;
    std::vector<T> mass_;
    std::vector<T> force_;
    std::array<std::vector<T>, 3> face_;
};

/// Source forces f at time level n (t = nΔt).
void source_forces(std::span<const SourceSpec> sources, std::size_t level, double dt, std::vector<PointForce>& out);

/**
 * Three consecutive time levels. `cur` holds level(), `prev` the level one
 * step behind in the current direction of integration.
 */
template <class T>
class SolverWindow {
public:
    SolverWindow(const Grid& grid, std::size_t level);
    SolverWindow(Field<T> prev, Field<T> cur, std::size_t level, int direction);

    Field<T>& prev() { return prev_; }
    Field<T>& cur() { return cur_; }
    Field<T>& next() { return next_; }
    const Field<T>& prev() const { return prev_; }
    const Field<T>& cur() const { return cur_; }

    std::size_t level() const { return level_; }
    int direction() const { return direction_; }

    /// Computes next from (prev, cur) and rotates; no array copies.
    void advance(const Propagator<T>& prop, std::span<const PointForce> forces);
    /// Turn around: the level behind becomes the one ahead.
    void reverse();

private:
    Field<T> prev_, cur_, next_;
    std::size_t level_;
    int direction_ = +1;
};

/// Guard against blow-up: checked every `interval` steps.
class InstabilityGuard {
public:
    explicit InstabilityGuard(double initial_scale = 0.0, std::size_t interval = 50)
        : scale_(initial_scale), interval_(interval) {}
    template <class T>
    void observe_forces(const Propagator<T>& prop, std::span<const PointForce> forces);
    template <class T>
    void check(const Field<T>& u, std::size_t step_count, std::size_t level, bool force_check = false);

private:
    double scale_;
    double step_force_ = 0.0;
    std::size_t interval_;
};

enum class RecorderMode { TracesOnly, FullHistory };

struct ForwardOptions {
    RecorderMode mode = RecorderMode::TracesOnly;
    /// Bytes allowed for the stored history in FullHistory mode.
    std::size_t history_budget = std::size_t{2} << 30;
    /// Called with each new level (1..N) as it becomes current.
    std::function<void(std::size_t, std::span<const double>)> on_level;
};

template <class T>
struct ForwardResult {
    SolverWindow<T> window;
    std::vector<Field<T>> history;  // levels 1..N when requested
    std::size_t history_bytes = 0;
};

/// Estimated footprint of a stored forward history.
std::size_t history_footprint(const Grid& grid, const TimeConfig& time, Precision precision);

/**
 * Homogeneous initial conditions u⁰ = u¹ = 0, then steps n = 1..N−1 to reach
 * level N. Sensor traces (levels 1..N) go into `sensors` if given.
 */
template <class T>
ForwardResult<T> run_forward(const MaterialModel& material, const TimeConfig& time, std::span<const SourceSpec> sources,
                             SensorArray* sensors, const ForwardOptions& options = {});

using ForceCallback = std::function<void(std::size_t level, std::vector<PointForce>& out)>;

/**
 * Integrates backwards from `window` (cur at level m, prev at m+1) down to
 * level `stop_level`, asking for the forces at each current level.
 * `on_level` is called after every step.
 */
template <class T>
void run_backward(const Propagator<T>& prop, SolverWindow<T>& window, std::size_t stop_level, const ForceCallback& forces,
                  const std::function<void(const SolverWindow<T>&)>& on_level = {});

/**
 * Independent single-step implementation written as 1×3 correlations of
 * explicitly padded arrays (replicated ghost material and solution). Used as
 * a test oracle for Propagator::step.
 */
template <class T>
void step_convolutional(const MaterialModel& material, double dt, const Field<T>& prev, const Field<T>& cur,
                        Field<T>& next, const Field<T>& force);

}  // namespace wavesens
