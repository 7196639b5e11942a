#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "wavesens/fwi.hpp"
#include "wavesens/material.hpp"
#include "wavesens/optimizer.hpp"
#include "wavesens/sensitivity.hpp"
#include "wavesens/source.hpp"

namespace wavesens {

enum class TatoMode { Suppress, Amplify };

TatoMode parse_tato_mode(std::string_view text);
std::string_view to_string(TatoMode mode);

/// ±(1/A) Σ_levels Σ_{Ω_s} u² Δx^d Δt, negative when amplifying.
class TatoObjective final : public Objective {
public:
    /// Throws ConfigError on an empty region or nodes outside the grid.
    TatoObjective(const Grid& grid, std::vector<NodeIndex> region, double dt, TatoMode mode);

    std::span<const NodeIndex> support() const override { return region_; }
    double measure(std::size_t level, std::span<const double> u, std::span<double> adjoint_force) const override;
    double gradient_scale() const override { return cell_; }

    double area() const { return area_; }

private:
    std::vector<NodeIndex> region_;
    double dt_, cell_, area_, sign_;
};

/**
 * Cost of a recorded region history (level-major: levels × region_size).
 * Throws ConfigError when the region is empty or the area is not positive.
 */
double cost_tato(std::span<const double> history, std::size_t region_size, double area, double dt, double dx, int dims,
                 TatoMode mode);

struct InverseParameters {
    std::vector<double> inv_density;
    std::vector<double> inv_bulk;
};

/// Linear interpolation of ρ⁻¹ and κ⁻¹; throws ConfigError outside [0, 1].
InverseParameters interpolate_material(std::span<const double> gamma, const AcousticConstants& constants);

/**
 * Linear-decay density filter on the design region: weights r_f − ‖x_i − x_k‖
 * over neighbours with ‖x_i − x_k‖ < r_f (cell units) that lie in the region,
 * normalized per node. Output is zero outside the region.
 */
class DensityFilter {
public:
    /// Empty mask = whole grid. Throws ConfigError for r_f ≤ 0 or a mask of the wrong size.
    DensityFilter(const Grid& grid, std::vector<unsigned char> design, double radius);

    std::vector<double> apply(std::span<const double> gamma) const;
    /// Transpose of apply: out_k = Σ_i W_ik g_i.
    std::vector<double> transpose(std::span<const double> g) const;

    double radius() const { return radius_; }
    const std::vector<unsigned char>& design() const { return design_; }

private:
    std::size_t size_;
    double radius_;
    std::vector<unsigned char> design_;
    std::vector<NodeIndex> nodes_;
    std::vector<std::size_t> start_;
    std::vector<NodeIndex> neighbour_;
    std::vector<double> weight_;
};

std::vector<double> density_filter(const Grid& grid, std::span<const double> gamma, double radius,
                                   std::span<const unsigned char> design = {});

/// Smoothed Heaviside [tanh(βη) + tanh(β(x−η))] / [tanh(βη) + tanh(β(1−η))].
double heaviside_project(double x, double beta, double eta);
double project_derivative(double x, double beta, double eta);
/// Nodewise projection followed by clipping to [0, 1].
std::vector<double> heaviside_project(std::span<const double> x, double beta, double eta);

struct BetaSchedule {
    double initial = 1.0;
    double factor = 1.1;
    std::size_t interval = 5;
};

/// β = initial · factor^⌊iteration / interval⌋.
double beta_schedule(std::size_t iteration, const BetaSchedule& schedule = {});

/// dC/dγ = Fᵀ (H'(γ̃) ⊙ dC/dγ̄̃).
std::vector<double> chain_rule(std::span<const double> d_projected, std::span<const double> filtered, double beta,
                               double eta, const DensityFilter& filter);

struct TatoProblem {
    Grid grid;
    TimeConfig time;
    AcousticConstants constants;
    std::vector<unsigned char> design;  // Ω_d
    std::vector<NodeIndex> region;      // Ω_s
    std::vector<SourceSpec> sources;
    double filter_radius = 1.5;
    double eta = 0.5;
    BetaSchedule beta;
    TatoMode mode = TatoMode::Suppress;
};

/// Throws ConfigError when masks, region, sources or filter parameters are inconsistent.
void validate(const TatoProblem& problem);

/// Nodes whose coordinates, as fractions of the domain length per axis, lie in [lo, hi].
std::vector<NodeIndex> box_nodes(const Grid& grid, std::span<const double> lo, std::span<const double> hi);

/**
 * Black-hole layout: source at the middle of the left edge, design region
 * above and below a central channel over the right two thirds, objective
 * square at the channel's end against the right wall.
 */
TatoProblem black_hole_problem(std::size_t nx, std::size_t ny, double length_x, const TimeConfig& time,
                               double frequency, TatoMode mode);

struct DesignFields {
    std::vector<double> filtered;   // γ̃
    std::vector<double> projected;  // γ̄̃, the physical indicator
};

DesignFields design_fields(const TatoProblem& problem, const DensityFilter& filter, std::span<const double> raw,
                           double beta);

/// Cost and gradient with respect to the raw design variables.
GradientResult tato_cost_gradient(const TatoProblem& problem, const DensityFilter& filter,
                                  std::span<const double> raw, double beta, GradientMethod method,
                                  const GradientOptions& options);

double tato_cost(const TatoProblem& problem, const DensityFilter& filter, std::span<const double> raw, double beta,
                 Precision precision = Precision::Double);

struct DesignOptions {
    std::size_t iterations = 150;
    AdamSettings adam{0.1, 0.9, 0.999, 1e-8};
    GradientMethod method = GradientMethod::Superposed;
    double k = 1.0;
    Precision precision = Precision::Single;
    double divergence_factor = 10.0;
};

struct DesignRecord {
    std::size_t iteration;
    double cost;
    double gradient_norm;
    double beta;
    double seconds;
};

struct DesignResult {
    std::vector<double> gamma;      // raw design variables
    std::vector<double> projected;  // physical indicator of the final design
    std::vector<DesignRecord> log;
};

/**
 * Adam on the raw variables (initially air), clipped to [0, 1] on Ω_d and 0
 * elsewhere. The callback sees each row with the raw and projected fields it
 * was evaluated at; the last row holds the cost of the final design. In
 * suppress mode a cost above divergence_factor × the initial cost throws
 * NumericalError.
 */
DesignResult optimize_design(
    const TatoProblem& problem, const DesignOptions& options,
    const std::function<void(const DesignRecord&, std::span<const double>, std::span<const double>)>& on_iteration = {});

}  // namespace wavesens
