#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "wavesens/material.hpp"
#include "wavesens/optimizer.hpp"
#include "wavesens/sensitivity.hpp"
#include "wavesens/source.hpp"

namespace wavesens {

/// ½ Σ_sensors Σ_levels (u − u^M)² Δt on recorded traces.
class FwiObjective final : public Objective {
public:
    /// measured: sensor-major N_r × N traces (sample j is level j + 1).
    FwiObjective(std::vector<NodeIndex> sensors, std::vector<double> measured, std::size_t samples, double dt);

    std::span<const NodeIndex> support() const override { return sensors_; }
    double measure(std::size_t level, std::span<const double> u, std::span<double> adjoint_force) const override;

private:
    std::vector<NodeIndex> sensors_;
    std::vector<double> measured_;
    std::size_t samples_;
    double dt_;
};

/// ½ Σ (u − u^M)² Δt. Throws std::invalid_argument on shape mismatch.
double cost_fwi(std::span<const double> traces, std::span<const double> measured, double dt);

/**
 * Traces of `truth` recorded on a grid refined by `refine` per axis and in
 * time: each coarse node becomes an r^d block of fine nodes (spacing Δx/r,
 * step Δt/r), the source density is injected on the block and the sensor
 * value is the block average, sampled at the coarse levels.
 */
SensorArray synthesize_measurements(const MaterialModel& truth, const TimeConfig& time,
                                    std::span<const SourceSpec> sources, std::span<const NodeIndex> sensors,
                                    int refine = 2);

/// Clamp to [lo, hi]; masked (fictitious-domain) nodes forced to lo.
void clip_indicator(std::span<double> gamma, double lo, double hi, std::span<const unsigned char> mask = {});

/// Intersection over union of {γ < threshold} with the truth void mask.
double void_iou(std::span<const double> gamma, std::span<const unsigned char> truth_void, double threshold = 0.5);

enum class GradientMethod { Reference, Superposed };

GradientMethod parse_gradient_method(std::string_view text);

struct FwiShot {
    SourceSpec source;
    std::vector<double> measured;  // N_r × N
};

struct FwiProblem {
    MaterialModel initial;  // ScalarRhoScaled, typically γ ≡ 1
    TimeConfig time;
    std::vector<NodeIndex> sensors;
    std::vector<FwiShot> shots;
    std::vector<unsigned char> embedding;  // nodes fixed at ε (may be empty)
};

struct InversionOptions {
    std::size_t iterations = 100;
    AdamSettings adam{0.05, 0.9, 0.999, 1e-8};
    GradientMethod method = GradientMethod::Superposed;
    double k = 1.0;
    Precision precision = Precision::Single;
    double divergence_factor = 10.0;
};

struct IterationRecord {
    std::size_t iteration;
    double cost;
    double gradient_norm;
    double seconds;
};

struct InversionResult {
    std::vector<double> gamma;
    std::vector<IterationRecord> log;
};

/// Sum of the per-shot costs and gradients at the given model.
GradientResult fwi_cost_gradient(const FwiProblem& problem, const MaterialModel& model, GradientMethod method,
                                 const GradientOptions& options);

/**
 * Adam on γ with clipping to [ε, 1]. The callback sees every log row and the
 * current model (before the update of that iteration). A final row holds the
 * cost after the last update. Throws NumericalError if the cost exceeds
 * divergence_factor × the initial cost.
 */
InversionResult invert(const FwiProblem& problem, const InversionOptions& options,
                       const std::function<void(const IterationRecord&, std::span<const double>)>& on_iteration = {});

}  // namespace wavesens
