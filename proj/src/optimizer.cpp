#include "wavesens/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wavesens {

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad) {
    if (params.size() != grad.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw std::invalid_argument("adam_step: parameter, gradient and state sizes differ");
    }
    const auto& s = state.settings;
    ++state.t;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = s.beta1 * state.m[i] + (1.0 - s.beta1) * grad[i];
        state.v[i] = s.beta2 * state.v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        params[i] -= s.alpha * mhat / (std::sqrt(vhat) + s.epsilon);
    }
}

void clip_bounds(std::span<double> params, double lo, double hi, std::span<const unsigned char> frozen,
                 double frozen_value) {
    if (!(lo < hi)) throw std::invalid_argument("clip_bounds: lo must be below hi");
    if (!frozen.empty() && frozen.size() != params.size()) throw std::invalid_argument("clip_bounds: mask size");
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i] = std::clamp(params[i], lo, hi);
        if (!frozen.empty() && frozen[i]) params[i] = frozen_value;
    }
}

}  // namespace wavesens
