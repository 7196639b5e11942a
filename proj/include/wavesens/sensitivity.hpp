#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wavesens/field.hpp"
#include "wavesens/material.hpp"
#include "wavesens/solver.hpp"
#include "wavesens/source.hpp"

namespace wavesens {

/**
 * Cost sampled at levels 1..N on a fixed node support. `measure` returns the
 * cost contribution of one level and writes the adjoint force at the support
 * nodes, already scaled so that the gradient is gradient_scale() × K(u, u†).
 */
class Objective {
public:
    virtual ~Objective() = default;
    virtual std::span<const NodeIndex> support() const = 0;
    virtual double measure(std::size_t level, std::span<const double> u, std::span<double> adjoint_force) const = 0;
    virtual double gradient_scale() const { return 1.0; }
};

/// One excitation and the objective it is scored with.
struct Shot {
    std::vector<SourceSpec> sources;
    const Objective* objective = nullptr;
};

/**
 * Material derivatives of the discrete operator, pre-multiplied by the
 * quadrature weights, for one material and time step:
 *
 *   K_m(a, b) = −(M'/Δt) Σ_half-steps Δa_m Δb_m
 *               + (Δt/Δx²) Σ_levels Σ_faces S'_mj (a_m − a_j)(b_m − b_j)
 *
 * M' is dM/dγ at the node and S'_mj = ∂S_mj/∂γ_m for the face between m and
 * its neighbour j. The form is symmetric and bilinear in (a, b).
 */
template <class T>
class KernelCoefficients {
public:
    KernelCoefficients(const MaterialModel& material, double dt);

    const Grid& grid() const { return grid_; }
    Flavor flavor() const { return flavor_; }
    T mass() const { return mass_; }
    /// Coefficient of the face toward +e_axis (up) or −e_axis (down); 0 when absent.
    T up(int axis, NodeIndex i) const { return up_[axis][i]; }
    T down(int axis, NodeIndex i) const { return down_[axis][i]; }

private:
    Grid grid_;
    Flavor flavor_;
    T mass_;
    std::array<std::vector<T>, 3> up_, down_;
};

template <class T>
struct KernelAccumulator {
    Flavor flavor;
    Field<T> values;

    KernelAccumulator(const Grid& grid, Flavor f) : flavor(f), values(grid) {}
    void reset() { values.fill(T(0)); }
};

/**
 * accum += sign × [mass term of the half-step (lo, hi) + stiffness term at
 * level hi] for the pair of histories a and b. Throws std::invalid_argument on
 * a flavor mismatch.
 */
template <class T>
void kernel_increment(KernelAccumulator<T>& accum, const Field<T>& a_lo, const Field<T>& a_hi, const Field<T>& b_lo,
                      const Field<T>& b_hi, const KernelCoefficients<T>& coeffs, T sign);

/// f† = −(u − u^M) at the sensor nodes, zero elsewhere.
Field<double> adjoint_source_fwi(const Grid& grid, std::span<const double> u_at_sensors, std::span<const double> measured,
                                 const SensorArray& sensors);

/// f† = −2u/A on the region (+2u/A when amplifying), zero elsewhere.
Field<double> adjoint_source_tato(const Field<double>& u, std::span<const NodeIndex> region, double area, bool amplify);

struct GradientOptions {
    Precision precision = Precision::Double;
    double k = 1.0;
    std::size_t history_budget = std::size_t{2} << 30;
    std::size_t adjoint_budget = std::size_t{1} << 30;
};

struct GradientStats {
    std::size_t peak_field_buffers = 0;    // grid-sized buffers alive at once
    std::size_t history_bytes = 0;         // stored forward history
    std::size_t adjoint_storage_bytes = 0; // compact adjoint forces
};

struct GradientResult {
    double cost = 0.0;
    std::vector<double> gradient;  // dC/dγ per node
    GradientStats stats;
};

/// Cost only: one forward solve with the objective evaluated online.
double evaluate_cost(const MaterialModel& material, const TimeConfig& time, const Shot& shot,
                     Precision precision = Precision::Double);

/// Adjoint gradient using a stored forward history (levels 1..N).
GradientResult gradient_reference(const MaterialModel& material, const TimeConfig& time, const Shot& shot,
                                  const GradientOptions& options = {});

/**
 * Adjoint gradient without forward storage: K(u,u) is subtracted during the
 * forward pass, the superposed field u + k·u† is integrated backwards from
 * the forward end state, K(uˢ,uˢ) is added, and the result is scaled by 1/(2k).
 * The neglected term is (k/2)·K(u†,u†).
 */
GradientResult gradient_superposed(const MaterialModel& material, const TimeConfig& time, const Shot& shot,
                                   const GradientOptions& options);

/// ‖a − ref‖₂ / ‖ref‖₂ (0 when both vanish, +inf when only ref vanishes).
double relative_rms_error(std::span<const double> approx, std::span<const double> reference);

struct CalibrationRow {
    double k;
    double rel_diff;  // single vs double superposed gradient
    bool agree;
};

struct CalibrationResult {
    double k = 0.0;
    std::vector<CalibrationRow> sweep;
};

struct CalibrationOptions {
    double k_start = 1e20;
    double decade_step = 10.0;
    double tolerance = 1e-2;
    int max_decades = 22;
};

/**
 * Walks k downwards from k_start by decade_step and compares single- and
 * double-precision superposed gradients. Returns the last k that agrees
 * before the first disagreement. Throws NumericalError with the sweep if no
 * k agrees.
 */
CalibrationResult calibrate_k(const std::function<std::vector<double>(double k, Precision p)>& gradient,
                              const CalibrationOptions& options = {});
CalibrationResult calibrate_k(const MaterialModel& material, const TimeConfig& time, std::span<const Shot> shots,
                              const CalibrationOptions& options = {});

std::string format_sweep(const std::vector<CalibrationRow>& sweep);

/**
 * Central differences (C(γ + h eᵢ) − C(γ − h eᵢ)) / 2h of a cost functional at
 * selected nodes. h shrinks near the bounds [lo, hi]; one-sided at a bound.
 */
std::vector<double> gradient_fd_oracle(const std::function<double(const std::vector<double>&)>& cost,
                                       const std::vector<double>& gamma, std::span<const NodeIndex> nodes, double h,
                                       double lo, double hi);

/// Same material with a different indicator field.
MaterialModel with_gamma(const MaterialModel& material, std::vector<double> gamma);

}  // namespace wavesens
