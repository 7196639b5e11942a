#include "wavesens/tato.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "wavesens/errors.hpp"

namespace wavesens {

TatoMode parse_tato_mode(std::string_view text) {
    if (text == "suppress") return TatoMode::Suppress;
    if (text == "amplify") return TatoMode::Amplify;
    throw ConfigError("unknown design mode '" + std::string(text) + "' (expected suppress or amplify)");
}

std::string_view to_string(TatoMode mode) { return mode == TatoMode::Suppress ? "suppress" : "amplify"; }

TatoObjective::TatoObjective(const Grid& grid, std::vector<NodeIndex> region, double dt, TatoMode mode)
    : region_(std::move(region)), dt_(dt), cell_(grid.cell_volume()),
      sign_(mode == TatoMode::Suppress ? 1.0 : -1.0) {
    if (region_.empty()) throw ConfigError("objective region is empty");
    for (auto n : region_)
        if (n >= grid.size()) throw ConfigError("objective region node outside grid");
    area_ = static_cast<double>(region_.size()) * cell_;
}

double TatoObjective::measure(std::size_t, std::span<const double> u, std::span<double> adjoint_force) const {
    double sum = 0.0;
    for (std::size_t s = 0; s < u.size(); ++s) {
        sum += u[s] * u[s];
        adjoint_force[s] = -sign_ * 2.0 * u[s] / area_;
    }
    return sign_ * sum * cell_ * dt_ / area_;
}

double cost_tato(std::span<const double> history, std::size_t region_size, double area, double dt, double dx, int dims,
                 TatoMode mode) {
    if (region_size == 0) throw ConfigError("objective region is empty");
    if (!(area > 0.0)) throw ConfigError("objective region area must be positive");
    if (history.size() % region_size != 0) throw std::invalid_argument("cost_tato: history is not levels x region");
    double sum = 0.0;
    for (double v : history) sum += v * v;
    const double c = sum * std::pow(dx, dims) * dt / area;
    return mode == TatoMode::Suppress ? c : -c;
}

InverseParameters interpolate_material(std::span<const double> gamma, const AcousticConstants& constants) {
    InverseParameters p;
    p.inv_density.reserve(gamma.size());
    p.inv_bulk.reserve(gamma.size());
    for (double g : gamma) {
        if (!(g >= 0.0 && g <= 1.0)) throw ConfigError("design indicator outside [0, 1]");
        p.inv_density.push_back(inverse_density(g, constants));
        p.inv_bulk.push_back(inverse_bulk_modulus(g, constants));
    }
    return p;
}

DensityFilter::DensityFilter(const Grid& grid, std::vector<unsigned char> design, double radius)
    : size_(grid.size()), radius_(radius), design_(std::move(design)) {
    if (!(radius > 0.0)) throw ConfigError("filter radius must be positive");
    if (design_.empty()) design_.assign(size_, 1);
    if (design_.size() != size_) throw ConfigError("design mask size mismatch");

    const int d = grid.dims();
    const long reach = static_cast<long>(std::ceil(radius)) - (std::ceil(radius) == radius ? 1 : 0);
    struct Offset {
        std::array<long, 3> o;
        double w;
    };
    std::vector<Offset> stencil;
    const long r2 = d >= 2 ? reach : 0, r3 = d >= 3 ? reach : 0;
    for (long k = -r3; k <= r3; ++k)
        for (long j = -r2; j <= r2; ++j)
            for (long i = -reach; i <= reach; ++i) {
                const double dist = std::sqrt(static_cast<double>(i * i + j * j + k * k));
                if (dist < radius) stencil.push_back({{i, j, k}, radius - dist});
            }

    start_.push_back(0);
    for (NodeIndex n = 0; n < size_; ++n) {
        if (!design_[n]) continue;
        nodes_.push_back(n);
        const Coords c = grid.coords(n);
        const std::size_t first = neighbour_.size();
        double total = 0.0;
        for (const auto& s : stencil) {
            Coords q = c;
            bool inside = true;
            for (int a = 0; a < 3 && inside; ++a) {
                const long v = static_cast<long>(c[a]) + s.o[a];
                inside = v >= 0 && (a >= d ? v == 0 : static_cast<std::size_t>(v) < grid.extent(a));
                q[a] = static_cast<std::size_t>(std::max(v, 0L));
            }
            if (!inside) continue;
            const NodeIndex m = grid.index(q);
            if (!design_[m]) continue;
            neighbour_.push_back(m);
            weight_.push_back(s.w);
            total += s.w;
        }
        for (std::size_t e = first; e < weight_.size(); ++e) weight_[e] /= total;
        start_.push_back(neighbour_.size());
    }
}

std::vector<double> DensityFilter::apply(std::span<const double> gamma) const {
    if (gamma.size() != size_) throw std::invalid_argument("density filter: size mismatch");
    std::vector<double> out(size_, 0.0);
#pragma omp parallel for schedule(static) if (nodes_.size() > 4096)
    for (std::size_t r = 0; r < nodes_.size(); ++r) {
        double s = 0.0;
        for (std::size_t e = start_[r]; e < start_[r + 1]; ++e) s += weight_[e] * gamma[neighbour_[e]];
        out[nodes_[r]] = s;
    }
    return out;
}

std::vector<double> DensityFilter::transpose(std::span<const double> g) const {
    if (g.size() != size_) throw std::invalid_argument("density filter: size mismatch");
    // serial scatter keeps the summation order fixed
    std::vector<double> out(size_, 0.0);
    for (std::size_t r = 0; r < nodes_.size(); ++r) {
        const double gi = g[nodes_[r]];
        for (std::size_t e = start_[r]; e < start_[r + 1]; ++e) out[neighbour_[e]] += weight_[e] * gi;
    }
    return out;
}

std::vector<double> density_filter(const Grid& grid, std::span<const double> gamma, double radius,
                                   std::span<const unsigned char> design) {
    return DensityFilter(grid, {design.begin(), design.end()}, radius).apply(gamma);
}

double heaviside_project(double x, double beta, double eta) {
    const double a = std::tanh(beta * eta);
    return (a + std::tanh(beta * (x - eta))) / (a + std::tanh(beta * (1.0 - eta)));
}

double project_derivative(double x, double beta, double eta) {
    const double ch = std::cosh(beta * (x - eta));
    return beta / ((std::tanh(beta * eta) + std::tanh(beta * (1.0 - eta))) * ch * ch);
}

std::vector<double> heaviside_project(std::span<const double> x, double beta, double eta) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::clamp(heaviside_project(x[i], beta, eta), 0.0, 1.0);
    return out;
}

double beta_schedule(std::size_t iteration, const BetaSchedule& schedule) {
    const auto steps = static_cast<double>(iteration / std::max<std::size_t>(schedule.interval, 1));
    return schedule.initial * std::pow(schedule.factor, steps);
}

std::vector<double> chain_rule(std::span<const double> d_projected, std::span<const double> filtered, double beta,
                               double eta, const DensityFilter& filter) {
    if (d_projected.size() != filtered.size()) throw std::invalid_argument("chain_rule: size mismatch");
    std::vector<double> g(d_projected.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = filter.design()[i] ? d_projected[i] * project_derivative(filtered[i], beta, eta) : 0.0;
    return filter.transpose(g);
}

void validate(const TatoProblem& p) {
    if (p.design.size() != p.grid.size()) throw ConfigError("design mask size does not match the grid");
    if (std::none_of(p.design.begin(), p.design.end(), [](unsigned char v) { return v != 0; }))
        throw ConfigError("design region is empty");
    if (p.region.empty()) throw ConfigError("objective region is empty");
    for (auto n : p.region)
        if (n >= p.grid.size()) throw ConfigError("objective region node outside grid");
    if (p.sources.empty()) throw ConfigError("design problem needs a source");
    for (const auto& s : p.sources) validate(s, p.grid);
    if (!(p.filter_radius > 0.0)) throw ConfigError("filter radius must be positive");
    if (!(p.eta > 0.0 && p.eta < 1.0)) throw ConfigError("projection threshold eta must lie in (0, 1)");
    if (!(p.beta.initial > 0.0) || p.beta.factor < 1.0 || p.beta.interval == 0)
        throw ConfigError("beta schedule needs initial > 0, factor >= 1 and interval >= 1");
    if (p.time.steps == 0 || !(p.time.dt > 0.0)) throw ConfigError("time stepping needs steps >= 1 and dt > 0");
}

std::vector<NodeIndex> box_nodes(const Grid& grid, std::span<const double> lo, std::span<const double> hi) {
    const int d = grid.dims();
    if (lo.size() != static_cast<std::size_t>(d) || hi.size() != static_cast<std::size_t>(d))
        throw ConfigError("box bounds need one value per axis");
    std::vector<NodeIndex> out;
    constexpr double tol = 1e-9;
    for (NodeIndex n = 0; n < grid.size(); ++n) {
        const Coords c = grid.coords(n);
        bool in = true;
        for (int a = 0; a < d && in; ++a) {
            const double f = static_cast<double>(c[a]) / static_cast<double>(grid.extent(a) - 1);
            in = f >= lo[a] - tol && f <= hi[a] + tol;
        }
        if (in) out.push_back(n);
    }
    return out;
}

TatoProblem black_hole_problem(std::size_t nx, std::size_t ny, double length_x, const TimeConfig& time,
                               double frequency, TatoMode mode) {
    TatoProblem p;
    p.grid = Grid::build({{nx, ny}, length_x / static_cast<double>(nx - 1)});
    p.time = time;
    p.mode = mode;
    // channel band 3/8..5/8 of the height, design from 1/3 of the length on
    const double lower[2][2] = {{1.0 / 3.0, 0.0}, {1.0, 0.375}};
    const double upper[2][2] = {{1.0 / 3.0, 0.625}, {1.0, 1.0}};
    const double target[2][2] = {{5.0 / 6.0, 0.375}, {1.0, 0.625}};
    p.design.assign(p.grid.size(), 0);
    for (auto n : box_nodes(p.grid, lower[0], lower[1])) p.design[n] = 1;
    for (auto n : box_nodes(p.grid, upper[0], upper[1])) p.design[n] = 1;
    p.region = box_nodes(p.grid, target[0], target[1]);
    for (auto n : p.region) p.design[n] = 0;
    p.sources = {{p.grid.index({0, ny / 2, 0}), 1e2, frequency, 2}};
    return p;
}

DesignFields design_fields(const TatoProblem& problem, const DensityFilter& filter, std::span<const double> raw,
                           double beta) {
    DesignFields f;
    f.filtered = filter.apply(raw);
    f.projected = heaviside_project(f.filtered, beta, problem.eta);
    for (std::size_t i = 0; i < f.projected.size(); ++i)
        if (!problem.design[i]) f.projected[i] = 0.0;
    return f;
}

GradientResult tato_cost_gradient(const TatoProblem& problem, const DensityFilter& filter,
                                  std::span<const double> raw, double beta, GradientMethod method,
                                  const GradientOptions& options) {
    const auto fields = design_fields(problem, filter, raw, beta);
    const auto material = MaterialModel::acoustic(problem.grid, fields.projected, problem.constants);
    TatoObjective obj(problem.grid, problem.region, problem.time.dt, problem.mode);
    const Shot shot{problem.sources, &obj};
    auto g = method == GradientMethod::Reference ? gradient_reference(material, problem.time, shot, options)
                                                 : gradient_superposed(material, problem.time, shot, options);
    g.gradient = chain_rule(g.gradient, fields.filtered, beta, problem.eta, filter);
    return g;
}

double tato_cost(const TatoProblem& problem, const DensityFilter& filter, std::span<const double> raw, double beta,
                 Precision precision) {
    const auto fields = design_fields(problem, filter, raw, beta);
    const auto material = MaterialModel::acoustic(problem.grid, fields.projected, problem.constants);
    TatoObjective obj(problem.grid, problem.region, problem.time.dt, problem.mode);
    return evaluate_cost(material, problem.time, Shot{problem.sources, &obj}, precision);
}

DesignResult optimize_design(
    const TatoProblem& problem, const DesignOptions& options,
    const std::function<void(const DesignRecord&, std::span<const double>, std::span<const double>)>& on_iteration) {
    validate(problem);
    const std::size_t n = problem.grid.size();
    const DensityFilter filter(problem.grid, problem.design, problem.filter_radius);
    std::vector<unsigned char> frozen(n);
    for (std::size_t i = 0; i < n; ++i) frozen[i] = !problem.design[i];

    DesignResult result;
    result.gamma.assign(n, 0.0);
    GradientOptions gopt;
    gopt.k = options.k;
    gopt.precision = options.precision;
    AdamState adam(n, options.adam);
    double initial_cost = 0.0;
    auto check_divergence = [&](std::size_t it, double cost) {
        if (!std::isfinite(cost)) throw NumericalError("design cost became non-finite at iteration " + std::to_string(it));
        if (problem.mode == TatoMode::Suppress && it > 0 && cost > options.divergence_factor * initial_cost) {
            std::ostringstream msg;
            msg << "design diverged at iteration " << it << ": cost " << cost << " exceeds "
                << options.divergence_factor << "x the initial cost " << initial_cost;
            throw NumericalError(msg.str());
        }
    };

    for (std::size_t it = 0; it < options.iterations; ++it) {
        const auto t0 = std::chrono::steady_clock::now();
        const double beta = beta_schedule(it, problem.beta);
        auto g = tato_cost_gradient(problem, filter, result.gamma, beta, options.method, gopt);
        if (it == 0) initial_cost = g.cost;
        double norm = 0.0;
        for (double v : g.gradient) norm += v * v;
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        DesignRecord rec{it, g.cost, std::sqrt(norm), beta, secs};
        result.log.push_back(rec);
        if (on_iteration) on_iteration(rec, result.gamma, design_fields(problem, filter, result.gamma, beta).projected);
        check_divergence(it, g.cost);
        adam_step(adam, result.gamma, g.gradient);
        clip_bounds(result.gamma, 0.0, 1.0, frozen, 0.0);
    }

    const auto t0 = std::chrono::steady_clock::now();
    const double beta = beta_schedule(options.iterations, problem.beta);
    const double cost = tato_cost(problem, filter, result.gamma, beta, options.precision);
    result.projected = design_fields(problem, filter, result.gamma, beta).projected;
    if (options.iterations == 0) initial_cost = cost;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    DesignRecord rec{options.iterations, cost, std::numeric_limits<double>::quiet_NaN(), beta, secs};
    result.log.push_back(rec);
    if (on_iteration) on_iteration(rec, result.gamma, result.projected);
    check_divergence(options.iterations, cost);
    return result;
}

}  // namespace wavesens
