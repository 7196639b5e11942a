#include "wavesens/fwi.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "wavesens/errors.hpp"

namespace wavesens {

FwiObjective::FwiObjective(std::vector<NodeIndex> sensors, std::vector<double> measured, std::size_t samples, double dt)
    : sensors_(std::move(sensors)), measured_(std::move(measured)), samples_(samples), dt_(dt) {
    if (measured_.size() != sensors_.size() * samples_) {
        throw ConfigError("measured traces have " + std::to_string(measured_.size()) + " values, expected " +
                          std::to_string(sensors_.size()) + " sensors x " + std::to_string(samples_) + " steps");
    }
}

double FwiObjective::measure(std::size_t level, std::span<const double> u, std::span<double> adjoint_force) const {
    double cost = 0.0;
    for (std::size_t s = 0; s < sensors_.size(); ++s) {
        const double r = u[s] - measured_[s * samples_ + level - 1];
        cost += 0.5 * r * r * dt_;
        adjoint_force[s] = -r;
    }
    return cost;
}

double cost_fwi(std::span<const double> traces, std::span<const double> measured, double dt) {
    if (traces.size() != measured.size()) throw std::invalid_argument("cost_fwi: trace shapes differ");
    double c = 0.0;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const double r = traces[i] - measured[i];
        c += r * r;
    }
    return 0.5 * c * dt;
}

SensorArray synthesize_measurements(const MaterialModel& truth, const TimeConfig& time,
                                    std::span<const SourceSpec> sources, std::span<const NodeIndex> sensors, int refine) {
    if (refine < 1) throw ConfigError("refinement factor must be at least 1");
    const Grid& coarse = truth.grid();
    const std::size_t r = static_cast<std::size_t>(refine);
    const int d = coarse.dims();

    GridConfig fc;
    for (int a = 0; a < d; ++a) fc.shape.push_back(coarse.extent(a) * r);
    fc.spacing = coarse.spacing() / static_cast<double>(r);
    const Grid fine = Grid::build(fc);

    std::vector<double> gamma(fine.size());
    for (NodeIndex p = 0; p < fine.size(); ++p) {
        Coords c = fine.coords(p);
        for (int a = 0; a < d; ++a) c[a] /= r;
        gamma[p] = truth.gamma()[coarse.index(c)];
    }
    const MaterialModel fine_truth = truth.flavor() == Flavor::ScalarRhoScaled
                                         ? MaterialModel::scalar(fine, gamma, truth.scalar_constants())
                                         : MaterialModel::acoustic(fine, gamma, truth.acoustic_constants());

    // Fine nodes of the block belonging to one coarse node.
    auto block = [&](NodeIndex coarse_node) {
        const Coords c = coarse.coords(coarse_node);
        std::vector<NodeIndex> out;
        const std::size_t r2 = d >= 2 ? r : 1, r3 = d >= 3 ? r : 1;
        for (std::size_t k = 0; k < r3; ++k)
            for (std::size_t j = 0; j < r2; ++j)
                for (std::size_t i = 0; i < r; ++i) out.push_back(fine.index({c[0] * r + i, c[1] * r + j, c[2] * r + k}));
        return out;
    };

    std::vector<SourceSpec> fine_sources;
    for (const auto& s : sources) {
        validate(s, coarse);
        for (auto p : block(s.node)) {
            SourceSpec fs = s;
            fs.node = p;
            fine_sources.push_back(fs);
        }
    }
    std::vector<NodeIndex> fine_sensors;
    for (auto n : sensors) {
        if (n >= coarse.size()) throw ConfigError("sensor node outside grid");
        for (auto p : block(n)) fine_sensors.push_back(p);
    }
    SensorArray fine_array(fine, fine_sensors);
    const TimeConfig fine_time{time.steps * r, time.dt / static_cast<double>(r)};
    run_forward<double>(fine_truth, fine_time, fine_sources, &fine_array);

    SensorArray out(coarse, std::vector<NodeIndex>(sensors.begin(), sensors.end()));
    out.allocate(time.steps);
    const std::size_t per = fine_sensors.size() / std::max<std::size_t>(sensors.size(), 1);
    for (std::size_t s = 0; s < sensors.size(); ++s) {
        auto dst = out.trace(s);
        for (std::size_t j = 0; j < time.steps; ++j) {
            double sum = 0.0;
            for (std::size_t q = 0; q < per; ++q) sum += fine_array.trace(s * per + q)[r * (j + 1) - 1];
            dst[j] = sum / static_cast<double>(per);
        }
    }
    return out;
}

void clip_indicator(std::span<double> gamma, double lo, double hi, std::span<const unsigned char> mask) {
    clip_bounds(gamma, lo, hi, mask, lo);
}

double void_iou(std::span<const double> gamma, std::span<const unsigned char> truth_void, double threshold) {
    if (gamma.size() != truth_void.size()) throw std::invalid_argument("void_iou: size mismatch");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < gamma.size(); ++i) {
        const bool p = gamma[i] < threshold, t = truth_void[i] != 0;
        inter += p && t;
        uni += p || t;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

GradientMethod parse_gradient_method(std::string_view text) {
    if (text == "reference") return GradientMethod::Reference;
    if (text == "superposed") return GradientMethod::Superposed;
    throw ConfigError("unknown gradient method '" + std::string(text) + "' (expected reference or superposed)");
}

GradientResult fwi_cost_gradient(const FwiProblem& problem, const MaterialModel& model, GradientMethod method,
                                 const GradientOptions& options) {
    GradientResult total;
    total.gradient.assign(model.grid().size(), 0.0);
    for (const auto& shot : problem.shots) {
        FwiObjective obj(problem.sensors, shot.measured, problem.time.steps, problem.time.dt);
        Shot s{{shot.source}, &obj};
        auto g = method == GradientMethod::Reference ? gradient_reference(model, problem.time, s, options)
                                                     : gradient_superposed(model, problem.time, s, options);
        total.cost += g.cost;
        for (std::size_t i = 0; i < total.gradient.size(); ++i) total.gradient[i] += g.gradient[i];
        total.stats.peak_field_buffers = std::max(total.stats.peak_field_buffers, g.stats.peak_field_buffers);
        total.stats.history_bytes = std::max(total.stats.history_bytes, g.stats.history_bytes);
        total.stats.adjoint_storage_bytes = std::max(total.stats.adjoint_storage_bytes, g.stats.adjoint_storage_bytes);
    }
    return total;
}

InversionResult invert(const FwiProblem& problem, const InversionOptions& options,
                       const std::function<void(const IterationRecord&, std::span<const double>)>& on_iteration) {
    if (problem.initial.flavor() != Flavor::ScalarRhoScaled) throw ConfigError("inversion needs the scalar flavor");
    const double eps = problem.initial.scalar_constants().epsilon;
    const std::size_t n = problem.initial.grid().size();
    if (!problem.embedding.empty() && problem.embedding.size() != n) throw ConfigError("embedding mask size mismatch");

    InversionResult result;
    result.gamma.assign(problem.initial.gamma().begin(), problem.initial.gamma().end());
    clip_indicator(result.gamma, eps, 1.0, problem.embedding);

    GradientOptions gopt;
    gopt.k = options.k;
    gopt.precision = options.precision;
    AdamState adam(n, options.adam);
    double initial_cost = 0.0;
    auto check_divergence = [&](std::size_t it, double cost) {
        if (it > 0 && cost > options.divergence_factor * initial_cost) {
            std::ostringstream msg;
            msg << "inversion diverged at iteration " << it << ": cost " << cost << " exceeds "
                << options.divergence_factor << "x the initial cost " << initial_cost;
            throw NumericalError(msg.str());
        }
    };

    for (std::size_t it = 0; it < options.iterations; ++it) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto model = with_gamma(problem.initial, result.gamma);
        auto g = fwi_cost_gradient(problem, model, options.method, gopt);
        if (it == 0) initial_cost = g.cost;
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!problem.embedding.empty() && problem.embedding[i]) g.gradient[i] = 0.0;
            norm += g.gradient[i] * g.gradient[i];
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        IterationRecord rec{it, g.cost, std::sqrt(norm), secs};
        result.log.push_back(rec);
        if (on_iteration) on_iteration(rec, result.gamma);
        check_divergence(it, g.cost);
        adam_step(adam, result.gamma, g.gradient);
        clip_indicator(result.gamma, eps, 1.0, problem.embedding);
    }

    const auto t0 = std::chrono::steady_clock::now();
    const auto model = with_gamma(problem.initial, result.gamma);
    double cost = 0.0;
    for (const auto& shot : problem.shots) {
        FwiObjective obj(problem.sensors, shot.measured, problem.time.steps, problem.time.dt);
        cost += evaluate_cost(model, problem.time, Shot{{shot.source}, &obj}, options.precision);
    }
    if (options.iterations == 0) initial_cost = cost;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    IterationRecord rec{options.iterations, cost, std::numeric_limits<double>::quiet_NaN(), secs};
    result.log.push_back(rec);
    if (on_iteration) on_iteration(rec, result.gamma);
    check_divergence(options.iterations, cost);
    return result;
}

}  // namespace wavesens
