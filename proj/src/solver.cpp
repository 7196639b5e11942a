#include "wavesens/solver.hpp"

#include <cmath>
#include <sstream>

#include "wavesens/errors.hpp"

namespace wavesens {

namespace {

struct Extents {
    std::size_t n1, n2, n3, s2, s3;
};

Extents extents_of(const Grid& g) {
    Extents e;
    e.n1 = g.extent(0);
    e.n2 = g.dims() >= 2 ? g.extent(1) : 1;
    e.n3 = g.dims() >= 3 ? g.extent(2) : 1;
    e.s2 = e.n1;
    e.s3 = e.n1 * e.n2;
    return e;
}

constexpr std::size_t kParallelThreshold = 4096;

}  // namespace

template <class T>
Propagator<T>::Propagator(const MaterialModel& material, double dt)
    : grid_(material.grid()), flavor_(material.flavor()), dt_(dt) {
    const std::size_t n = grid_.size();
    const double dx = grid_.spacing();
    mass_.resize(n);
    force_.resize(n);
    auto gamma = material.gamma();
    if (flavor_ == Flavor::ScalarRhoScaled) {
        const auto& c = material.scalar_constants();
        const double courant2 = std::pow(c.c0 * dt / dx, 2);
        for (std::size_t i = 0; i < n; ++i) {
            mass_[i] = static_cast<T>(courant2 / gamma[i]);
            force_[i] = static_cast<T>(dt * dt / (c.rho0 * gamma[i]));
        }
    } else {
        auto kappa = material.bulk_modulus();
        const double r2 = std::pow(dt / dx, 2);
        for (std::size_t i = 0; i < n; ++i) {
            mass_[i] = static_cast<T>(kappa[i] * r2);
            force_[i] = static_cast<T>(kappa[i] * dt * dt);
        }
    }
    auto rho = material.density();
    for (int a = 0; a < grid_.dims(); ++a) {
        auto& w = face_[a];
        w.assign(n, T(0));
        const std::size_t s = grid_.stride(a);
        for (std::size_t i = 0; i < n; ++i) {
            if (grid_.coords(i)[a] + 1 >= grid_.extent(a)) continue;
            const std::size_t j = i + s;
            double v;
            if (flavor_ == Flavor::ScalarRhoScaled) {
                v = 2.0 * gamma[i] * gamma[j] / (gamma[i] + gamma[j]);
            } else {
                v = 2.0 / (rho[i] + rho[j]);
            }
            w[i] = static_cast<T>(v);
        }
    }
}

template <class T>
void Propagator<T>::apply_stencil(const Field<T>& prev, const Field<T>& cur, Field<T>& next) const {
    const Extents e = extents_of(grid_);
    const int d = grid_.dims();
    const T* up = prev.data();
    const T* u = cur.data();
    T* out = next.data();
    const T* m = mass_.data();
    const T* w1 = face_[0].data();
    const T* w2 = d >= 2 ? face_[1].data() : nullptr;
    const T* w3 = d >= 3 ? face_[2].data() : nullptr;
    const long long rows = static_cast<long long>(e.n2 * e.n3);

#pragma omp parallel for schedule(static) if (grid_.size() >= kParallelThreshold)
    for (long long r = 0; r < rows; ++r) {
        const std::size_t j = static_cast<std::size_t>(r) % e.n2;
        const std::size_t k = static_cast<std::size_t>(r) / e.n2;
        const std::size_t base = j * e.s2 + k * e.s3;
        for (std::size_t i = 0; i < e.n1; ++i) {
            const std::size_t idx = base + i;
            const T ui = u[idx];
            T lap = 0;
            if (i > 0) lap += w1[idx - 1] * (u[idx - 1] - ui);
            if (i + 1 < e.n1) lap += w1[idx] * (u[idx + 1] - ui);
            if (d >= 2) {
                if (j > 0) lap += w2[idx - e.s2] * (u[idx - e.s2] - ui);
                if (j + 1 < e.n2) lap += w2[idx] * (u[idx + e.s2] - ui);
            }
            if (d >= 3) {
                if (k > 0) lap += w3[idx - e.s3] * (u[idx - e.s3] - ui);
                if (k + 1 < e.n3) lap += w3[idx] * (u[idx + e.s3] - ui);
            }
            out[idx] = T(2) * ui - up[idx] + m[idx] * lap;
        }
    }
}

template <class T>
void Propagator<T>::step(const Field<T>& prev, const Field<T>& cur, Field<T>& next,
                         std::span<const PointForce> forces) const {
    apply_stencil(prev, cur, next);
    for (const auto& f : forces) next[f.node] += force_[f.node] * static_cast<T>(f.value);
}

template <class T>
void Propagator<T>::step(const Field<T>& prev, const Field<T>& cur, Field<T>& next, const Field<T>& force) const {
    apply_stencil(prev, cur, next);
    for (std::size_t i = 0; i < next.size(); ++i) next[i] += force_[i] * force[i];
}

void source_forces(std::span<const SourceSpec> sources, std::size_t level, double dt, std::vector<PointForce>& out) {
    out.clear();
    const double t = static_cast<double>(level) * dt;
    for (const auto& s : sources) {
        const double v = burst_amplitude(t, s);
        if (v != 0.0) out.push_back({s.node, v});
    }
}

template <class T>
SolverWindow<T>::SolverWindow(const Grid& grid, std::size_t level)
    : prev_(grid), cur_(grid), next_(grid), level_(level) {}

template <class T>
SolverWindow<T>::SolverWindow(Field<T> prev, Field<T> cur, std::size_t level, int direction)
    : prev_(std::move(prev)), cur_(std::move(cur)), next_(cur_.grid()), level_(level), direction_(direction) {}

template <class T>
void SolverWindow<T>::advance(const Propagator<T>& prop, std::span<const PointForce> forces) {
    prop.step(prev_, cur_, next_, forces);
    swap(prev_, cur_);
    swap(cur_, next_);
    level_ = direction_ > 0 ? level_ + 1 : level_ - 1;
}

template <class T>
void SolverWindow<T>::reverse() {
    swap(prev_, cur_);
    level_ = direction_ > 0 ? level_ - 1 : level_ + 1;
    direction_ = -direction_;
}

template <class T>
void InstabilityGuard::observe_forces(const Propagator<T>& prop, std::span<const PointForce> forces) {
    double m = 0.0;
    for (const auto& f : forces) m = std::max(m, std::abs(static_cast<double>(prop.force_factor(f.node)) * f.value));
    step_force_ = std::max(step_force_, m);
    scale_ += m;
}

template <class T>
void InstabilityGuard::check(const Field<T>& u, std::size_t step_count, std::size_t level, bool force_check) {
    if (!force_check && (interval_ == 0 || step_count % interval_ != 0)) return;
    const double peak = static_cast<double>(u.max_abs());
    const double limit = 1e6 * scale_ * static_cast<double>(1 + step_count);
    if (!u.all_finite() || peak > limit) {
        std::ostringstream msg;
        msg << "wavefield instability after " << step_count << " steps (level " << level << "): max|u| = " << peak;
        if (u.all_finite()) msg << " exceeds guard " << limit;
        msg << "; check the Courant number, or adjust k for superposed runs";
        throw NumericalError(msg.str());
    }
}

std::size_t history_footprint(const Grid& grid, const TimeConfig& time, Precision precision) {
    const std::size_t bytes = precision == Precision::Single ? sizeof(float) : sizeof(double);
    return time.steps * grid.size() * bytes;
}

template <class T>
ForwardResult<T> run_forward(const MaterialModel& material, const TimeConfig& time, std::span<const SourceSpec> sources,
                             SensorArray* sensors, const ForwardOptions& options) {
    const Grid& grid = material.grid();
    for (const auto& s : sources) validate(s, grid);
    Propagator<T> prop(material, time.dt);
    ForwardResult<T> result{SolverWindow<T>(grid, 1), {}, 0};
    auto& w = result.window;

    const bool keep = options.mode == RecorderMode::FullHistory;
    if (keep) {
        const auto need = history_footprint(grid, time, precision_of<T>());
        if (need > options.history_budget) {
            std::ostringstream msg;
            msg << "stored forward history needs " << need << " bytes, budget is " << options.history_budget;
            throw BudgetError(msg.str());
        }
        result.history.reserve(time.steps);
        result.history_bytes = need;
    }

    auto record = [&]() {
        const std::size_t level = w.level();
        if (sensors) {
            for (std::size_t s = 0; s < sensors->count(); ++s) {
                sensors->trace(s)[level - 1] = static_cast<double>(w.cur()[sensors->nodes()[s]]);
            }
        }
        if (keep) result.history.push_back(w.cur());
        if (options.on_level) options.on_level(level, w.cur().to_double());
    };

    if (sensors) sensors->allocate(time.steps);
    record();
    InstabilityGuard guard;
    std::vector<PointForce> forces;
    for (std::size_t n = 1; n < time.steps; ++n) {
        source_forces(sources, n, time.dt, forces);
        guard.observe_forces(prop, std::span<const PointForce>(forces));
        w.advance(prop, forces);
        record();
        guard.check(w.cur(), n, w.level());
    }
    guard.check(w.cur(), time.steps - 1, w.level(), true);
    return result;
}

template <class T>
void run_backward(const Propagator<T>& prop, SolverWindow<T>& window, std::size_t stop_level,
                  const ForceCallback& forces, const std::function<void(const SolverWindow<T>&)>& on_level) {
    if (window.direction() >= 0) throw std::logic_error("run_backward needs a reversed window");
    InstabilityGuard guard(std::max<double>(window.cur().max_abs(), window.prev().max_abs()));
    std::vector<PointForce> buf;
    std::size_t count = 0;
    while (window.level() > stop_level) {
        buf.clear();
        if (forces) forces(window.level(), buf);
        guard.observe_forces(prop, std::span<const PointForce>(buf));
        window.advance(prop, buf);
        ++count;
        if (on_level) on_level(window);
        guard.check(window.cur(), count, window.level());
    }
    if (count > 0) guard.check(window.cur(), count, window.level(), true);
}

template <class T>
void step_convolutional(const MaterialModel& material, double dt, const Field<T>& prev, const Field<T>& cur,
                        Field<T>& next, const Field<T>& force) {
    const Grid& g = material.grid();
    const int d = g.dims();
    const double dx = g.spacing();
    const bool scalar = material.flavor() == Flavor::ScalarRhoScaled;

    // Padded shape and strides.
    std::array<std::size_t, 3> pn{1, 1, 1}, ps{1, 1, 1};
    for (int a = 0; a < d; ++a) pn[a] = g.extent(a) + 2;
    ps[1] = pn[0];
    ps[2] = pn[0] * pn[1];
    const std::size_t total = pn[0] * pn[1] * pn[2];
    auto clamp_index = [&](const std::array<std::size_t, 3>& p) {
        Coords c{0, 0, 0};
        for (int a = 0; a < d; ++a) {
            const std::size_t q = p[a] == 0 ? 0 : p[a] - 1;
            c[a] = std::min(q, g.extent(a) - 1);
        }
        return g.index(c);
    };

    // Material channel seen by the face correlation: 1/γ (scalar) or ρ (acoustic).
    std::vector<T> pu(total), pm(total);
    auto gamma = material.gamma();
    auto rho = material.density();
    for (std::size_t p = 0; p < total; ++p) {
        std::array<std::size_t, 3> pc{p % pn[0], (p / pn[0]) % pn[1], p / (pn[0] * pn[1])};
        const NodeIndex src = clamp_index(pc);
        pu[p] = cur[src];
        pm[p] = scalar ? static_cast<T>(1.0 / gamma[src]) : static_cast<T>(rho[src]);
    }

    constexpr std::array<T, 3> k_fwd{T(0), T(-1), T(1)};
    constexpr std::array<T, 3> k_bwd{T(-1), T(1), T(0)};
    constexpr std::array<T, 3> s_fwd{T(0), T(1), T(1)};
    constexpr std::array<T, 3> s_bwd{T(1), T(1), T(0)};
    auto correlate = [](const std::vector<T>& arr, std::size_t p, std::size_t stride, const std::array<T, 3>& k) {
        return k[0] * arr[p - stride] + k[1] * arr[p] + k[2] * arr[p + stride];
    };
    auto div = [](T num, T den) { return den == T(0) ? T(0) : num / den; };

    double c2;
    if (scalar) {
        const auto& c = material.scalar_constants();
        c2 = std::pow(c.c0 * dt / dx, 2);
    } else {
        c2 = std::pow(dt / dx, 2);
    }
    for (NodeIndex i = 0; i < g.size(); ++i) {
        const Coords c = g.coords(i);
        std::size_t p = 0;
        for (int a = 0; a < d; ++a) p += (c[a] + 1) * ps[a];
        T sum = 0;
        for (int a = 0; a < d; ++a) {
            sum += div(correlate(pu, p, ps[a], k_fwd), correlate(pm, p, ps[a], s_fwd)) -
                   div(correlate(pu, p, ps[a], k_bwd), correlate(pm, p, ps[a], s_bwd));
        }
        T coef, fcoef;
        if (scalar) {
            const auto& sc = material.scalar_constants();
            coef = static_cast<T>(2.0 * c2 / gamma[i]);
            fcoef = static_cast<T>(dt * dt / (sc.rho0 * gamma[i]));
        } else {
            const double kappa = material.bulk_modulus()[i];
            coef = static_cast<T>(2.0 * kappa * c2);
            fcoef = static_cast<T>(kappa * dt * dt);
        }
        next[i] = T(2) * cur[i] - prev[i] + coef * sum + fcoef * force[i];
    }
}

#define WAVESENS_INSTANTIATE(T)                                                                                     \
    template class Propagator<T>;                                                                                   \
    template class SolverWindow<T>;                                                                                 \
    template void InstabilityGuard::observe_forces<T>(const Propagator<T>&, std::span<const PointForce>);         \
    template void InstabilityGuard::check<T>(const Field<T>&, std::size_t, std::size_t, bool);                    \
    template ForwardResult<T> run_forward<T>(const MaterialModel&, const TimeConfig&, std::span<const SourceSpec>, \
                                             SensorArray*, const ForwardOptions&);                                 \
    template void run_backward<T>(const Propagator<T>&, SolverWindow<T>&, std::size_t, const ForceCallback&,      \
                                  const std::function<void(const SolverWindow<T>&)>&);                             \
    template void step_convolutional<T>(const MaterialModel&, double, const Field<T>&, const Field<T>&, Field<T>&, \
                                        const Field<T>&);

WAVESENS_INSTANTIATE(float)
WAVESENS_INSTANTIATE(double)

}  // namespace wavesens
