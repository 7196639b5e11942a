#include "wavesens/material.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "wavesens/errors.hpp"
#include "wavesens/field.hpp"

namespace wavesens {

std::string_view to_string(Flavor f) {
    return f == Flavor::ScalarRhoScaled ? "scalar_rho_scaled" : "acoustic_interp";
}

std::string_view to_string(Precision p) { return p == Precision::Single ? "single" : "double"; }

Precision parse_precision(std::string_view text) {
    if (text == "single" || text == "float32") return Precision::Single;
    if (text == "double" || text == "float64") return Precision::Double;
    throw ConfigError("unknown precision '" + std::string(text) + "' (expected single or double)");
}

namespace {

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw ConfigError(std::string("material constant ") + name + " must be positive");
    }
}

void check_bounds(std::span<const double> gamma, double lo, double hi) {
    for (std::size_t i = 0; i < gamma.size(); ++i) {
        if (!(gamma[i] >= lo && gamma[i] <= hi)) {
            std::ostringstream msg;
            msg << "indicator value " << gamma[i] << " at node " << i << " outside [" << lo << ", " << hi << "]";
            throw ConfigError(msg.str());
        }
    }
}

}  // namespace

double inverse_density(double gamma, const AcousticConstants& c) {
    return (1.0 - gamma) / c.rho1 + gamma / c.rho2;
}

double inverse_bulk_modulus(double gamma, const AcousticConstants& c) {
    return (1.0 - gamma) / c.kappa1 + gamma / c.kappa2;
}

MaterialModel MaterialModel::scalar(const Grid& grid, std::vector<double> gamma, const ScalarConstants& constants) {
    require_positive(constants.rho0, "rho0");
    require_positive(constants.c0, "c0");
    require_positive(constants.epsilon, "epsilon");
    if (gamma.size() != grid.size()) throw ConfigError("indicator size does not match grid");
    check_bounds(gamma, constants.epsilon, 1.0);
    MaterialModel m;
    m.flavor_ = Flavor::ScalarRhoScaled;
    m.grid_ = grid;
    m.gamma_ = std::move(gamma);
    m.scalar_ = constants;
    return m;
}

MaterialModel MaterialModel::acoustic(const Grid& grid, std::vector<double> gamma, const AcousticConstants& constants) {
    require_positive(constants.rho1, "rho1");
    require_positive(constants.kappa1, "kappa1");
    require_positive(constants.rho2, "rho2");
    require_positive(constants.kappa2, "kappa2");
    if (gamma.size() != grid.size()) throw ConfigError("indicator size does not match grid");
    check_bounds(gamma, 0.0, 1.0);
    MaterialModel m;
    m.flavor_ = Flavor::AcousticInterp;
    m.grid_ = grid;
    m.gamma_ = std::move(gamma);
    m.acoustic_ = constants;
    m.density_.resize(m.gamma_.size());
    m.bulk_.resize(m.gamma_.size());
    for (std::size_t i = 0; i < m.gamma_.size(); ++i) {
        m.density_[i] = 1.0 / inverse_density(m.gamma_[i], constants);
        m.bulk_[i] = 1.0 / inverse_bulk_modulus(m.gamma_[i], constants);
    }
    return m;
}

MaterialModel MaterialModel::homogeneous_scalar(const Grid& grid, const ScalarConstants& constants, double gamma) {
    return scalar(grid, std::vector<double>(grid.size(), gamma), constants);
}

double MaterialModel::mass_derivative() const {
    if (flavor_ == Flavor::ScalarRhoScaled) return scalar_.rho0;
    return 1.0 / acoustic_.kappa2 - 1.0 / acoustic_.kappa1;
}

double MaterialModel::max_wave_speed() const {
    if (flavor_ == Flavor::ScalarRhoScaled) return scalar_.c0;
    // Gershgorin on the row of node i: κ_i · max over faces of 2/(ρ_i + ρ_j).
    // Equals κ/ρ when homogeneous; pairing κ_max with ρ_min of different
    // nodes would overestimate air/solid mixtures by ~50x.
    double c2 = 0.0;
    for (NodeIndex i = 0; i < grid_.size(); ++i) {
        const Coords c = grid_.coords(i);
        double w = 0.0;
        for (int a = 0; a < grid_.dims(); ++a) {
            const std::size_t s = grid_.stride(a);
            if (c[a] > 0) w = std::max(w, 2.0 / (density_[i] + density_[i - s]));
            if (c[a] + 1 < grid_.extent(a)) w = std::max(w, 2.0 / (density_[i] + density_[i + s]));
        }
        c2 = std::max(c2, bulk_[i] * w);
    }
    return std::sqrt(c2);
}

CourantReport cfl_report(const Grid& grid, const MaterialModel& material, const TimeConfig& time) {
    CourantReport r;
    r.max_speed = material.max_wave_speed();
    r.courant = r.max_speed * time.dt / grid.spacing();
    r.limit = 1.0 / std::sqrt(static_cast<double>(grid.dims()));
    r.stable = r.courant <= r.limit;
    return r;
}

}  // namespace wavesens
