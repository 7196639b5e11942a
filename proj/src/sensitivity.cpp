#include "wavesens/sensitivity.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "wavesens/errors.hpp"

namespace wavesens {

template <class T>
KernelCoefficients<T>::KernelCoefficients(const MaterialModel& material, double dt)
    : grid_(material.grid()), flavor_(material.flavor()) {
    const double dx = grid_.spacing();
    mass_ = static_cast<T>(-material.mass_derivative() / dt);
    const double stiff = dt / (dx * dx);
    auto gamma = material.gamma();
    auto rho = material.density();
    const std::size_t n = grid_.size();

    // ∂S_mj/∂γ_m for the face between m and j.
    auto face_derivative = [&](NodeIndex m, NodeIndex j) {
        if (flavor_ == Flavor::ScalarRhoScaled) {
            const auto& c = material.scalar_constants();
            const double s = gamma[m] + gamma[j];
            return c.rho0 * c.c0 * c.c0 * 2.0 * gamma[j] * gamma[j] / (s * s);
        }
        const auto& c = material.acoustic_constants();
        const double s = rho[m] + rho[j];
        return (1.0 / c.rho2 - 1.0 / c.rho1) * 2.0 * rho[m] * rho[m] / (s * s);
    };

    for (int a = 0; a < grid_.dims(); ++a) {
        up_[a].assign(n, T(0));
        down_[a].assign(n, T(0));
        const std::size_t s = grid_.stride(a);
        for (NodeIndex m = 0; m < n; ++m) {
            const auto c = grid_.coords(m)[a];
            if (c + 1 < grid_.extent(a)) up_[a][m] = static_cast<T>(stiff * face_derivative(m, m + s));
            if (c > 0) down_[a][m] = static_cast<T>(stiff * face_derivative(m, m - s));
        }
    }
}

template <class T>
void kernel_increment(KernelAccumulator<T>& accum, const Field<T>& a_lo, const Field<T>& a_hi, const Field<T>& b_lo,
                      const Field<T>& b_hi, const KernelCoefficients<T>& coeffs, T sign) {
    if (accum.flavor != coeffs.flavor()) throw std::invalid_argument("kernel flavor does not match material");
    const Grid& g = coeffs.grid();
    const int d = g.dims();
    const std::size_t n1 = g.extent(0);
    const std::size_t n2 = d >= 2 ? g.extent(1) : 1;
    const std::size_t n3 = d >= 3 ? g.extent(2) : 1;
    const std::size_t s2 = n1, s3 = n1 * n2;
    const T mass = coeffs.mass();
    T* acc = accum.values.data();
    const T* al = a_lo.data();
    const T* ah = a_hi.data();
    const T* bl = b_lo.data();
    const T* bh = b_hi.data();
    const long long rows = static_cast<long long>(n2 * n3);

#pragma omp parallel for schedule(static) if (g.size() >= 4096)
    for (long long r = 0; r < rows; ++r) {
        const std::size_t j = static_cast<std::size_t>(r) % n2;
        const std::size_t k = static_cast<std::size_t>(r) / n2;
        const std::size_t base = j * s2 + k * s3;
        for (std::size_t i = 0; i < n1; ++i) {
            const std::size_t m = base + i;
            const T am = ah[m], bm = bh[m];
            T v = mass * ((ah[m] - al[m]) * (bh[m] - bl[m]));
            auto face = [&](T c, std::size_t nb) { v += c * ((am - ah[nb]) * (bm - bh[nb])); };
            if (i > 0) face(coeffs.down(0, m), m - 1);
            if (i + 1 < n1) face(coeffs.up(0, m), m + 1);
            if (d >= 2) {
                if (j > 0) face(coeffs.down(1, m), m - s2);
                if (j + 1 < n2) face(coeffs.up(1, m), m + s2);
            }
            if (d >= 3) {
                if (k > 0) face(coeffs.down(2, m), m - s3);
                if (k + 1 < n3) face(coeffs.up(2, m), m + s3);
            }
            acc[m] += sign * v;
        }
    }
}

Field<double> adjoint_source_fwi(const Grid& grid, std::span<const double> u_at_sensors, std::span<const double> measured,
                                 const SensorArray& sensors) {
    if (u_at_sensors.size() != sensors.count() || measured.size() != sensors.count()) {
        throw std::invalid_argument("adjoint source: value count does not match sensor count");
    }
    Field<double> f(grid);
    for (std::size_t s = 0; s < sensors.count(); ++s) f[sensors.nodes()[s]] += -(u_at_sensors[s] - measured[s]);
    return f;
}

Field<double> adjoint_source_tato(const Field<double>& u, std::span<const NodeIndex> region, double area, bool amplify) {
    if (region.empty()) throw ConfigError("objective region is empty");
    if (!(area > 0.0)) throw ConfigError("objective region area must be positive");
    Field<double> f(u.grid());
    const double sign = amplify ? 1.0 : -1.0;
    for (auto n : region) f[n] = sign * 2.0 * u[n] / area;
    return f;
}

double relative_rms_error(std::span<const double> approx, std::span<const double> reference) {
    if (approx.size() != reference.size()) throw std::invalid_argument("relative error: size mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < approx.size(); ++i) {
        const double e = approx[i] - reference[i];
        num += e * e;
        den += reference[i] * reference[i];
    }
    if (!std::isfinite(num)) return std::numeric_limits<double>::infinity();
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(num / den);
}

MaterialModel with_gamma(const MaterialModel& material, std::vector<double> gamma) {
    if (material.flavor() == Flavor::ScalarRhoScaled) {
        return MaterialModel::scalar(material.grid(), std::move(gamma), material.scalar_constants());
    }
    return MaterialModel::acoustic(material.grid(), std::move(gamma), material.acoustic_constants());
}

namespace {

void require_objective(const Shot& shot) {
    if (!shot.objective) throw std::invalid_argument("shot has no objective");
}

template <class T>
void gather(const Field<T>& u, std::span<const NodeIndex> nodes, std::vector<double>& out) {
    out.resize(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) out[i] = static_cast<double>(u[nodes[i]]);
}

template <class T>
double cost_impl(const MaterialModel& material, const TimeConfig& time, const Shot& shot) {
    const auto& obj = *shot.objective;
    const auto support = obj.support();
    std::vector<double> u, scratch(support.size());
    double cost = 0.0;
    Propagator<T> prop(material, time.dt);
    SolverWindow<T> w(material.grid(), 1);
    gather(w.cur(), support, u);
    cost += obj.measure(1, u, scratch);
    InstabilityGuard guard;
    std::vector<PointForce> forces;
    for (std::size_t n = 1; n < time.steps; ++n) {
        source_forces(shot.sources, n, time.dt, forces);
        guard.observe_forces(prop, std::span<const PointForce>(forces));
        w.advance(prop, forces);
        guard.check(w.cur(), n, w.level());
        gather(w.cur(), support, u);
        cost += obj.measure(w.level(), u, scratch);
    }
    guard.check(w.cur(), time.steps, w.level(), true);
    return cost;
}

template <class T>
GradientResult reference_impl(const MaterialModel& material, const TimeConfig& time, const Shot& shot,
                              const GradientOptions& options) {
    const auto& obj = *shot.objective;
    const auto support = obj.support();
    const std::size_t N = time.steps;
    PeakBufferScope buffers;

    ForwardOptions fopt;
    fopt.mode = RecorderMode::FullHistory;
    fopt.history_budget = options.history_budget;
    auto fwd = run_forward<T>(material, time, shot.sources, nullptr, fopt);
    auto& history = fwd.history;

    GradientResult result;
    const std::size_t m_sup = support.size();
    std::vector<double> adj(N * m_sup), u;
    for (std::size_t level = 1; level <= N; ++level) {
        gather(history[level - 1], support, u);
        result.cost += obj.measure(level, u, std::span<double>(adj).subspan((level - 1) * m_sup, m_sup));
    }
    // The forward end window is no longer needed.
    fwd.window = SolverWindow<T>(Field<T>(), Field<T>(), 0, 1);

    Propagator<T> prop(material, time.dt);
    KernelCoefficients<T> coeffs(material, time.dt);
    KernelAccumulator<T> accum(material.grid(), material.flavor());
    SolverWindow<T> w(Field<T>(material.grid()), Field<T>(material.grid()), N, -1);
    run_backward<T>(
        prop, w, 1,
        [&](std::size_t level, std::vector<PointForce>& out) {
            for (std::size_t s = 0; s < m_sup; ++s) {
                const double v = adj[(level - 1) * m_sup + s];
                if (v != 0.0) out.push_back({support[s], v});
            }
        },
        [&](const SolverWindow<T>& win) {
            const std::size_t m = win.level() + 1;  // half-step (m−1, m)
            kernel_increment(accum, history[m - 2], history[m - 1], win.cur(), win.prev(), coeffs, T(1));
        });

    const double scale = obj.gradient_scale();
    result.gradient.resize(material.grid().size());
    for (std::size_t i = 0; i < result.gradient.size(); ++i) {
        result.gradient[i] = scale * static_cast<double>(accum.values[i]);
    }
    result.stats.peak_field_buffers = buffers.extra_peak();
    result.stats.history_bytes = fwd.history_bytes;
    result.stats.adjoint_storage_bytes = adj.size() * sizeof(double);
    return result;
}

template <class T>
GradientResult superposed_impl(const MaterialModel& material, const TimeConfig& time, const Shot& shot,
                               const GradientOptions& options) {
    if (!(options.k > 0.0) || !std::isfinite(options.k)) throw ConfigError("superposition factor k must be positive");
    const auto& obj = *shot.objective;
    const auto support = obj.support();
    const std::size_t N = time.steps;
    const std::size_t m_sup = support.size();
    const std::size_t adj_bytes = N * m_sup * sizeof(double);
    if (adj_bytes > options.adjoint_budget) {
        std::ostringstream msg;
        msg << "compact adjoint-force storage needs " << adj_bytes << " bytes, budget is " << options.adjoint_budget;
        throw BudgetError(msg.str());
    }
    for (const auto& s : shot.sources) validate(s, material.grid());

    PeakBufferScope buffers;
    GradientResult result;
    Propagator<T> prop(material, time.dt);
    KernelCoefficients<T> coeffs(material, time.dt);
    KernelAccumulator<T> accum(material.grid(), material.flavor());
    SolverWindow<T> w(material.grid(), 1);

    std::vector<double> adj(N * m_sup), u;
    bool any_adjoint = false;
    auto measure = [&]() {
        const std::size_t level = w.level();
        gather(w.cur(), support, u);
        auto slot = std::span<double>(adj).subspan((level - 1) * m_sup, m_sup);
        result.cost += obj.measure(level, u, slot);
        for (double v : slot) any_adjoint = any_adjoint || v != 0.0;
    };

    // Forward: u¹ .. uᴺ, removing K(u,u); one extra step gives u^{N+1}.
    measure();
    InstabilityGuard guard;
    std::vector<PointForce> forces;
    for (std::size_t n = 1; n <= N; ++n) {
        source_forces(shot.sources, n, time.dt, forces);
        guard.observe_forces(prop, std::span<const PointForce>(forces));
        w.advance(prop, forces);
        guard.check(w.cur(), n, w.level());
        if (n < N) {
            kernel_increment(accum, w.prev(), w.cur(), w.prev(), w.cur(), coeffs, T(-1));
            measure();
        }
    }
    guard.check(w.cur(), N, w.level(), true);

    result.gradient.assign(material.grid().size(), 0.0);
    result.stats.adjoint_storage_bytes = adj_bytes;
    if (!any_adjoint) {
        result.stats.peak_field_buffers = buffers.extra_peak();
        return result;
    }

    // Backward: superposed field from (u^{N+1}, uᴺ), forces f + k f†.
    w.reverse();
    const double k = options.k;
    try {
        run_backward<T>(
            prop, w, 1,
            [&](std::size_t level, std::vector<PointForce>& out) {
                source_forces(shot.sources, level, time.dt, out);
                for (std::size_t s = 0; s < m_sup; ++s) {
                    const double v = adj[(level - 1) * m_sup + s];
                    if (v != 0.0) out.push_back({support[s], k * v});
                }
            },
            [&](const SolverWindow<T>& win) {
                kernel_increment(accum, win.cur(), win.prev(), win.cur(), win.prev(), coeffs, T(1));
            });
    } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " (superposed pass with k = " + std::to_string(k) +
                             "; lower k if this is overflow)");
    }
    if (!accum.values.all_finite()) {
        std::ostringstream msg;
        msg << "non-finite kernel in superposed pass with k = " << k
            << "; lower k (overflow) or raise it (underflow) and recalibrate";
        throw NumericalError(msg.str());
    }

    const double scale = obj.gradient_scale() / (2.0 * k);
    for (std::size_t i = 0; i < result.gradient.size(); ++i) {
        result.gradient[i] = scale * static_cast<double>(accum.values[i]);
    }
    result.stats.peak_field_buffers = buffers.extra_peak();
    return result;
}

}  // namespace

double evaluate_cost(const MaterialModel& material, const TimeConfig& time, const Shot& shot, Precision precision) {
    require_objective(shot);
    return precision == Precision::Single ? cost_impl<float>(material, time, shot)
                                          : cost_impl<double>(material, time, shot);
}

GradientResult gradient_reference(const MaterialModel& material, const TimeConfig& time, const Shot& shot,
                                  const GradientOptions& options) {
    require_objective(shot);
    return options.precision == Precision::Single ? reference_impl<float>(material, time, shot, options)
                                                  : reference_impl<double>(material, time, shot, options);
}

GradientResult gradient_superposed(const MaterialModel& material, const TimeConfig& time, const Shot& shot,
                                   const GradientOptions& options) {
    require_objective(shot);
    return options.precision == Precision::Single ? superposed_impl<float>(material, time, shot, options)
                                                  : superposed_impl<double>(material, time, shot, options);
}

std::string format_sweep(const std::vector<CalibrationRow>& sweep) {
    std::ostringstream out;
    out << "k,rel_diff_single_vs_double,agree\n";
    for (const auto& r : sweep) out << std::setprecision(6) << r.k << "," << r.rel_diff << "," << (r.agree ? 1 : 0) << "\n";
    return out.str();
}

CalibrationResult calibrate_k(const std::function<std::vector<double>(double, Precision)>& gradient,
                              const CalibrationOptions& options) {
    if (!(options.k_start > 0.0)) throw ConfigError("k_start must be positive");
    if (!(options.decade_step > 1.0)) throw ConfigError("decade_step must exceed 1");
    if (!(options.tolerance > 0.0)) throw ConfigError("calibration tolerance must be positive");
    CalibrationResult result;
    bool found = false;
    double k = options.k_start;
    for (int i = 0; i <= options.max_decades; ++i, k /= options.decade_step) {
        double rel = std::numeric_limits<double>::infinity();
        try {
            const auto gd = gradient(k, Precision::Double);
            if (i == 0 && relative_rms_error(gd, std::vector<double>(gd.size(), 0.0)) == 0.0) {
                // Zero adjoint source: every k gives the zero gradient.
                result.k = k;
                result.sweep.push_back({k, 0.0, true});
                return result;
            }
            const auto gs = gradient(k, Precision::Single);
            rel = relative_rms_error(gs, gd);
        } catch (const NumericalError&) {
        }
        const bool agree = rel <= options.tolerance;
        result.sweep.push_back({k, rel, agree});
        if (agree) {
            result.k = k;
            found = true;
        } else if (found) {
            return result;
        }
    }
    if (!found) {
        throw NumericalError("no k in the sweep gives single/double agreement within tolerance:\n" +
                             format_sweep(result.sweep));
    }
    return result;
}

CalibrationResult calibrate_k(const MaterialModel& material, const TimeConfig& time, std::span<const Shot> shots,
                              const CalibrationOptions& options) {
    return calibrate_k(
        [&](double k, Precision p) {
            std::vector<double> total(material.grid().size(), 0.0);
            GradientOptions go;
            go.k = k;
            go.precision = p;
            for (const auto& shot : shots) {
                auto g = gradient_superposed(material, time, shot, go);
                for (std::size_t i = 0; i < total.size(); ++i) total[i] += g.gradient[i];
            }
            return total;
        },
        options);
}

std::vector<double> gradient_fd_oracle(const std::function<double(const std::vector<double>&)>& cost,
                                       const std::vector<double>& gamma, std::span<const NodeIndex> nodes, double h,
                                       double lo, double hi) {
    std::vector<double> out;
    out.reserve(nodes.size());
    for (auto n : nodes) {
        if (n >= gamma.size()) throw std::out_of_range("finite-difference node outside the field");
        const double g0 = gamma[n];
        const double hp = std::min(h, hi - g0), hm = std::min(h, g0 - lo);
        auto perturbed = gamma;
        double value;
        if (hp > 0.0 && hm > 0.0) {
            const double step = std::min(hp, hm);
            perturbed[n] = g0 + step;
            const double cp = cost(perturbed);
            perturbed[n] = g0 - step;
            const double cm = cost(perturbed);
            value = (cp - cm) / (2.0 * step);
        } else if (hp > 0.0) {
            perturbed[n] = g0 + hp;
            value = (cost(perturbed) - cost(gamma)) / hp;
        } else if (hm > 0.0) {
            perturbed[n] = g0 - hm;
            value = (cost(gamma) - cost(perturbed)) / hm;
        } else {
            throw ConfigError("finite-difference bounds leave no room to perturb");
        }
        out.push_back(value);
    }
    return out;
}

template class KernelCoefficients<float>;
template class KernelCoefficients<double>;
template void kernel_increment<float>(KernelAccumulator<float>&, const Field<float>&, const Field<float>&,
                                      const Field<float>&, const Field<float>&, const KernelCoefficients<float>&, float);
template void kernel_increment<double>(KernelAccumulator<double>&, const Field<double>&, const Field<double>&,
                                       const Field<double>&, const Field<double>&, const KernelCoefficients<double>&,
                                       double);

}  // namespace wavesens
