#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace wavesens {

struct AdamSettings {
    double alpha = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Per-parameter first/second moments and the step counter.
struct AdamState {
    AdamSettings settings;
    std::vector<double> m, v;
    std::size_t t = 0;

    AdamState() = default;
    AdamState(std::size_t n, const AdamSettings& s) : settings(s), m(n, 0.0), v(n, 0.0) {}
};

/// params ← params − α m̂/(√v̂ + ε) with bias-corrected moments.
/// Throws std::invalid_argument on size mismatch.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad);

/// Nodewise clamp to [lo, hi]; nodes with frozen[i] set are forced to `frozen_value`.
void clip_bounds(std::span<double> params, double lo, double hi, std::span<const unsigned char> frozen = {},
                 double frozen_value = 0.0);

}  // namespace wavesens
