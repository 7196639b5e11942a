// Command-line front end: forward | gradient | calibrate | ksweep | invert | design | bench.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "wavesens/config.hpp"
#include "wavesens/errors.hpp"
#include "wavesens/fwi.hpp"
#include "wavesens/io.hpp"
#include "wavesens/sensitivity.hpp"
#include "wavesens/solver.hpp"
#include "wavesens/tato.hpp"

using namespace wavesens;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Overrides {
    std::string config;
    std::string out;
    std::string precision;
    std::string method;
    std::optional<double> k;
    std::optional<unsigned long> seed;
    int threads = 0;
};

struct Run {
    std::string command;
    RunConfig cfg;
    fs::path out;
    json meta;

    void save_meta() const { write_json(out / "metadata.json", meta); }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string level_name(const char* prefix, std::size_t level) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%06zu", prefix, level);
    return buf;
}

Run prepare(const std::string& command, const Overrides& o) {
    Run run;
    run.command = command;
    run.cfg = load_config(o.config);
    auto& g = run.cfg.gradient;
    if (!o.precision.empty()) g.precision = parse_precision(o.precision);
    if (!o.method.empty()) g.method = parse_gradient_method(o.method);
    if (o.k) {
        if (!(*o.k > 0.0)) throw ConfigError("--k must be positive");
        g.k = *o.k;
        g.calibrate = false;
    }
    if (o.seed) run.cfg.seed = *o.seed;
    run.out = o.out.empty() ? run.cfg.output.dir : fs::path(o.out);
    ensure_directory(run.out);

    auto& r = run.cfg.resolved;
    r["gradient"]["precision"] = std::string(to_string(g.precision));
    r["gradient"]["method"] = g.method == GradientMethod::Reference ? "reference" : "superposed";
    r["gradient"]["k"] = g.calibrate ? json("calibrate") : json(g.k);
    r["problem"]["seed"] = run.cfg.seed;
    r["output"]["dir"] = run.out.string();

    int threads = 1;
#ifdef _OPENMP
    if (o.threads > 0) omp_set_num_threads(o.threads);
    threads = omp_get_max_threads();
#endif
    run.meta = {{"command", command},
                {"config_file", o.config},
                {"threads", threads},
                {"config", r},
                {"status", "running"}};
    run.save_meta();
    return run;
}

std::vector<double> design_start(const RunConfig& cfg) {
    std::vector<double> raw(cfg.grid.size(), 0.0);
    for (std::size_t i = 0; i < raw.size(); ++i)
        if (cfg.design[i]) raw[i] = cfg.model_gamma;
    return raw;
}

// Owns the per-source objectives of an FWI problem so shots stay valid.
struct FwiShots {
    FwiProblem problem;
    std::vector<FwiObjective> objectives;
    std::vector<Shot> shots;

    explicit FwiShots(const RunConfig& cfg) : problem(make_fwi_problem(cfg)) {
        objectives.reserve(problem.shots.size());
        for (const auto& s : problem.shots)
            objectives.emplace_back(problem.sensors, s.measured, problem.time.steps, problem.time.dt);
        for (std::size_t i = 0; i < problem.shots.size(); ++i)
            shots.push_back(Shot{{problem.shots[i].source}, &objectives[i]});
    }
};

// k for superposed runs; calibrates when the config asks for it.
double resolve_k(Run& run, const std::function<std::vector<double>(double, Precision)>& superposed) {
    auto& g = run.cfg.gradient;
    if (!g.calibrate || g.method == GradientMethod::Reference) return g.k;
    std::cerr << "calibrating k ..." << std::endl;
    CalibrationResult c;
    try {
        c = calibrate_k(superposed, g.calibration);
    } catch (...) {
        run.meta["status"] = "calibration failed";
        run.save_meta();
        throw;
    }
    std::ofstream(run.out / "calibration.csv") << format_sweep(c.sweep);
    run.meta["calibrated_k"] = c.k;
    std::cerr << "calibrated k = " << c.k << std::endl;
    return c.k;
}

std::function<std::vector<double>(double, Precision)> fwi_superposed(const FwiShots& fs, const MaterialModel& model) {
    return [&fs, &model](double k, Precision p) {
        GradientOptions o;
        o.k = k;
        o.precision = p;
        return fwi_cost_gradient(fs.problem, model, GradientMethod::Superposed, o).gradient;
    };
}

std::function<std::vector<double>(double, Precision)> tato_superposed(const TatoProblem& p, const DensityFilter& f,
                                                                      const std::vector<double>& raw, double beta) {
    return [&p, &f, &raw, beta](double k, Precision prec) {
        GradientOptions o;
        o.k = k;
        o.precision = prec;
        return tato_cost_gradient(p, f, raw, beta, GradientMethod::Superposed, o).gradient;
    };
}

void dump(const Run& run, const std::string& name, std::span<const double> values, const char* quantity,
          long step = -1, std::optional<Precision> precision = {}) {
    write_field(run.out / name, run.cfg.grid, values, precision.value_or(run.cfg.gradient.precision),
                {quantity, run.cfg.time.dt, step});
}

// ---------------------------------------------------------------------------

void cmd_forward(Run& run) {
    const auto& cfg = run.cfg;
    MaterialModel model = cfg.kind == ProblemKind::Fwi ? make_truth(cfg) : make_model(cfg);
    if (cfg.kind == ProblemKind::Tato) {
        auto p = make_tato_problem(cfg);
        DensityFilter filter(p.grid, p.design, p.filter_radius);
        auto fields = design_fields(p, filter, design_start(cfg), p.beta.initial);
        model = MaterialModel::acoustic(cfg.grid, fields.projected, cfg.acoustic);
    }
    dump(run, "model", model.gamma(), "gamma", -1, Precision::Double);

    std::optional<SensorArray> sensors;
    if (!cfg.sensors.empty()) sensors.emplace(cfg.grid, cfg.sensors);
    ForwardOptions opt;
    std::size_t snapshots = 0;
    if (cfg.output.dump_interval > 0) {
        opt.on_level = [&](std::size_t level, std::span<const double> u) {
            if (level % cfg.output.dump_interval != 0 && level != cfg.time.steps) return;
            dump(run, level_name("u", level), u, "u", static_cast<long>(level));
            ++snapshots;
        };
    }
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.gradient.precision == Precision::Single)
        run_forward<float>(model, cfg.time, cfg.sources, sensors ? &*sensors : nullptr, opt);
    else
        run_forward<double>(model, cfg.time, cfg.sources, sensors ? &*sensors : nullptr, opt);
    const double secs = seconds_since(t0);
    if (sensors) write_traces(run.out / "traces", cfg.grid, cfg.sensors, sensors->traces(), cfg.time.steps, cfg.time.dt);

    const auto cr = cfl_report(cfg.grid, model, cfg.time);
    run.meta["result"] = {{"seconds", secs},
                          {"snapshots", snapshots},
                          {"sensors", cfg.sensors.size()},
                          {"courant", cr.courant},
                          {"stable", cr.stable}};
    std::cout << "forward: " << cfg.time.steps << " steps in " << secs << " s, " << snapshots << " snapshots, "
              << cfg.sensors.size() << " traces -> " << run.out.string() << "\n";
}

void cmd_gradient(Run& run) {
    const auto& cfg = run.cfg;
    GradientOptions opt;
    opt.precision = cfg.gradient.precision;
    GradientResult g;
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.kind == ProblemKind::Fwi) {
        FwiShots fs(cfg);
        const auto& model = fs.problem.initial;
        opt.k = resolve_k(run, fwi_superposed(fs, model));
        g = fwi_cost_gradient(fs.problem, model, cfg.gradient.method, opt);
    } else if (cfg.kind == ProblemKind::Tato) {
        auto p = make_tato_problem(cfg);
        DensityFilter filter(p.grid, p.design, p.filter_radius);
        const auto raw = design_start(cfg);
        opt.k = resolve_k(run, tato_superposed(p, filter, raw, p.beta.initial));
        g = tato_cost_gradient(p, filter, raw, p.beta.initial, cfg.gradient.method, opt);
    } else {
        throw ConfigError("gradient needs an fwi or tato problem");
    }
    const double secs = seconds_since(t0);
    dump(run, "gradient", g.gradient, "dC/dgamma", -1, Precision::Double);
    double norm = 0.0;
    for (double v : g.gradient) norm += v * v;
    run.meta["result"] = {{"cost", g.cost},
                          {"gradient_norm", std::sqrt(norm)},
                          {"k", opt.k},
                          {"seconds", secs},
                          {"peak_field_buffers", g.stats.peak_field_buffers},
                          {"history_bytes", g.stats.history_bytes},
                          {"adjoint_storage_bytes", g.stats.adjoint_storage_bytes}};
    std::cout << "cost " << g.cost << ", |gradient| " << std::sqrt(norm) << " (" << secs << " s)\n";
}

void cmd_calibrate(Run& run) {
    run.cfg.gradient.calibrate = true;
    run.cfg.gradient.method = GradientMethod::Superposed;
    const auto& cfg = run.cfg;
    double k = 0.0;
    if (cfg.kind == ProblemKind::Fwi) {
        FwiShots fs(cfg);
        k = resolve_k(run, fwi_superposed(fs, fs.problem.initial));
    } else if (cfg.kind == ProblemKind::Tato) {
        auto p = make_tato_problem(cfg);
        DensityFilter filter(p.grid, p.design, p.filter_radius);
        const auto raw = design_start(cfg);
        k = resolve_k(run, tato_superposed(p, filter, raw, p.beta.initial));
    } else {
        throw ConfigError("calibrate needs an fwi or tato problem");
    }
    run.meta["result"] = {{"k", k}};
    std::cout << "k = " << k << "\n";
}

void cmd_ksweep(Run& run) {
    const auto& cfg = run.cfg;
    std::function<GradientResult(GradientMethod, const GradientOptions&)> eval;
    std::optional<FwiShots> fs;
    std::optional<TatoProblem> tp;
    std::optional<DensityFilter> filter;
    std::vector<double> raw;
    if (cfg.kind == ProblemKind::Fwi) {
        fs.emplace(cfg);
        eval = [&](GradientMethod m, const GradientOptions& o) {
            return fwi_cost_gradient(fs->problem, fs->problem.initial, m, o);
        };
    } else if (cfg.kind == ProblemKind::Tato) {
        tp.emplace(make_tato_problem(cfg));
        filter.emplace(tp->grid, tp->design, tp->filter_radius);
        raw = design_start(cfg);
        eval = [&](GradientMethod m, const GradientOptions& o) {
            return tato_cost_gradient(*tp, *filter, raw, tp->beta.initial, m, o);
        };
    } else {
        throw ConfigError("ksweep needs an fwi or tato problem");
    }
    GradientOptions ref_opt;
    ref_opt.precision = Precision::Double;
    const auto ref = eval(GradientMethod::Reference, ref_opt);

    CsvWriter csv(run.out / "ksweep.csv", {"k", "rel_error_single", "rel_error_double"});
    json rows = json::array();
    for (double k : cfg.gradient.sweep_k) {
        double err[2];
        for (int p = 0; p < 2; ++p) {
            GradientOptions o;
            o.k = k;
            o.precision = p == 0 ? Precision::Single : Precision::Double;
            try {
                err[p] = relative_rms_error(eval(GradientMethod::Superposed, o).gradient, ref.gradient);
            } catch (const NumericalError&) {
                err[p] = std::numeric_limits<double>::infinity();
            }
        }
        csv.row({k, err[0], err[1]});
        csv.flush();
        std::cerr << "k " << k << ": single " << err[0] << ", double " << err[1] << std::endl;
    }
    run.meta["result"] = {{"reference_cost", ref.cost}, {"rows", cfg.gradient.sweep_k.size()}};
    std::cout << "ksweep: " << cfg.gradient.sweep_k.size() << " values of k -> " << (run.out / "ksweep.csv").string()
              << "\n";
}

void cmd_invert(Run& run) {
    const auto& cfg = run.cfg;
    if (cfg.kind != ProblemKind::Fwi) throw ConfigError("invert needs an fwi problem");
    FwiShots fs(cfg);
    const auto truth_void = truth_void_mask(cfg);
    InversionOptions opt;
    opt.iterations = cfg.optimizer.iterations;
    opt.adam = cfg.optimizer.adam;
    opt.method = cfg.gradient.method;
    opt.precision = cfg.gradient.precision;
    opt.divergence_factor = cfg.optimizer.divergence_factor;
    opt.k = resolve_k(run, fwi_superposed(fs, fs.problem.initial));
    run.meta["k"] = opt.k;
    run.save_meta();

    CsvWriter log(run.out / "log.csv", {"iteration", "cost", "gradient_norm", "iou", "seconds"});
    auto on_iter = [&](const IterationRecord& r, std::span<const double> gamma) {
        log.row({static_cast<double>(r.iteration), r.cost, r.gradient_norm, void_iou(gamma, truth_void), r.seconds});
        log.flush();
        const bool last = std::isnan(r.gradient_norm);
        if (cfg.output.dump_interval > 0 && (r.iteration % cfg.output.dump_interval == 0 || last))
            dump(run, level_name("gamma", r.iteration), gamma, "gamma", -1, Precision::Double);
        std::cerr << "iteration " << r.iteration << ": cost " << r.cost << std::endl;
    };
    InversionResult res;
    try {
        res = invert(fs.problem, opt, on_iter);
    } catch (...) {
        run.meta["status"] = "failed";
        run.save_meta();
        throw;
    }
    dump(run, "gamma_final", res.gamma, "gamma", -1, Precision::Double);
    const double iou = void_iou(res.gamma, truth_void);
    run.meta["result"] = {{"initial_cost", res.log.front().cost}, {"final_cost", res.log.back().cost}, {"iou", iou}};
    std::cout << "invert: cost " << res.log.front().cost << " -> " << res.log.back().cost << ", void IoU " << iou
              << "\n";
}

void cmd_design(Run& run) {
    const auto& cfg = run.cfg;
    if (cfg.kind != ProblemKind::Tato) throw ConfigError("design needs a tato problem");
    const auto problem = make_tato_problem(cfg);
    DesignOptions opt;
    opt.iterations = cfg.optimizer.iterations;
    opt.adam = cfg.optimizer.adam;
    opt.method = cfg.gradient.method;
    opt.precision = cfg.gradient.precision;
    opt.divergence_factor = cfg.optimizer.divergence_factor;
    {
        DensityFilter filter(problem.grid, problem.design, problem.filter_radius);
        std::vector<double> air(problem.grid.size(), 0.0);
        opt.k = resolve_k(run, tato_superposed(problem, filter, air, problem.beta.initial));
    }
    run.meta["k"] = opt.k;
    run.save_meta();

    CsvWriter log(run.out / "log.csv", {"iteration", "cost", "gradient_norm", "beta", "seconds"});
    auto on_iter = [&](const DesignRecord& r, std::span<const double>, std::span<const double> projected) {
        log.row({static_cast<double>(r.iteration), r.cost, r.gradient_norm, r.beta, r.seconds});
        log.flush();
        const bool last = std::isnan(r.gradient_norm);
        if (cfg.output.dump_interval > 0 && (r.iteration % cfg.output.dump_interval == 0 || last))
            dump(run, level_name("design", r.iteration), projected, "gamma_projected", -1, Precision::Double);
        std::cerr << "iteration " << r.iteration << ": cost " << r.cost << " beta " << r.beta << std::endl;
    };
    DesignResult res;
    try {
        res = optimize_design(problem, opt, on_iter);
    } catch (...) {
        run.meta["status"] = "failed";
        run.save_meta();
        throw;
    }
    dump(run, "design_final", res.projected, "gamma_projected", -1, Precision::Double);
    dump(run, "design_raw", res.gamma, "gamma_raw", -1, Precision::Double);
    const double ratio = res.log.back().cost / res.log.front().cost;
    run.meta["result"] = {{"baseline_cost", res.log.front().cost}, {"final_cost", res.log.back().cost}, {"ratio", ratio}};
    std::cout << "design (" << to_string(problem.mode) << "): cost " << res.log.front().cost << " -> "
              << res.log.back().cost << " (ratio " << ratio << ")\n";
}

void cmd_bench(Run& run) {
    const auto& cfg = run.cfg;
    CsvWriter csv(run.out / "bench.csv", {"dofs", "forward_s_per_step", "gradient_s_per_step", "peak_field_buffers",
                                          "reference_history_bytes_N", "reference_history_bytes_2N"});
    for (std::size_t n : cfg.bench.sizes) {
        const double dx = 1.0 / static_cast<double>(n - 1);
        const auto grid = Grid::build({{n, n}, dx});
        const auto model = MaterialModel::homogeneous_scalar(grid, cfg.scalar);
        const TimeConfig time{cfg.bench.steps, 0.5 * dx / cfg.scalar.c0};
        const double f = cfg.scalar.c0 / (20.0 * dx);
        const std::vector<SourceSpec> src{{grid.index({n / 4, n / 2, 0}), 1.0, f, 2}};
        const std::vector<NodeIndex> sensor_nodes{grid.index({3 * n / 4, n / 2, 0})};

        auto t0 = std::chrono::steady_clock::now();
        if (cfg.gradient.precision == Precision::Single)
            run_forward<float>(model, time, src, nullptr);
        else
            run_forward<double>(model, time, src, nullptr);
        const double fwd = seconds_since(t0) / static_cast<double>(time.steps);

        std::vector<double> zeros(time.steps, 0.0);
        FwiObjective obj(sensor_nodes, zeros, time.steps, time.dt);
        GradientOptions o;
        o.precision = cfg.gradient.precision;
        o.k = cfg.gradient.k;
        t0 = std::chrono::steady_clock::now();
        const auto g = gradient_superposed(model, time, Shot{src, &obj}, o);
        const double grad = seconds_since(t0) / static_cast<double>(time.steps);
        const auto h1 = history_footprint(grid, time, cfg.gradient.precision);
        const auto h2 = history_footprint(grid, {2 * time.steps, time.dt}, cfg.gradient.precision);
        csv.row({static_cast<double>(grid.size()), fwd, grad, static_cast<double>(g.stats.peak_field_buffers),
                 static_cast<double>(h1), static_cast<double>(h2)});
        csv.flush();
        std::cerr << n << "x" << n << ": forward " << fwd << " s/step, gradient " << grad << " s/step, "
                  << g.stats.peak_field_buffers << " buffers" << std::endl;
    }
    run.meta["result"] = {{"sizes", cfg.bench.sizes}, {"steps", cfg.bench.steps}};
    std::cout << "bench -> " << (run.out / "bench.csv").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite-difference wave-equation sensitivities, inversion and acoustic design"};
    app.require_subcommand(1);
    Overrides o;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config,-c", o.config, "TOML run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--out,-o", o.out, "output directory (overrides [output] dir)");
        sub->add_option("--precision", o.precision, "single or double")
            ->check(CLI::IsMember({"single", "double"}));
        sub->add_option("--method", o.method, "reference or superposed")
            ->check(CLI::IsMember({"reference", "superposed"}));
        sub->add_option("--k", o.k, "superposition parameter (skips calibration)");
        sub->add_option("--seed", o.seed, "seed recorded with the run");
        sub->add_option("--threads", o.threads, "OpenMP threads (1 = bitwise reproducible)")
            ->check(CLI::NonNegativeNumber);
    };
    const std::vector<std::pair<const char*, const char*>> commands{
        {"forward", "run the forward solver, dump snapshots and traces"},
        {"gradient", "one cost and gradient evaluation"},
        {"calibrate", "choose k by comparing single and double precision"},
        {"ksweep", "error of the superposed gradient versus k"},
        {"invert", "full waveform inversion"},
        {"design", "acoustic topology optimization"},
        {"bench", "timing and memory per grid size"},
    };
    for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    std::optional<Run> run;
    try {
        run.emplace(prepare(command, o));
        const auto t0 = std::chrono::steady_clock::now();
        if (command == "forward") cmd_forward(*run);
        else if (command == "gradient") cmd_gradient(*run);
        else if (command == "calibrate") cmd_calibrate(*run);
        else if (command == "ksweep") cmd_ksweep(*run);
        else if (command == "invert") cmd_invert(*run);
        else if (command == "design") cmd_design(*run);
        else if (command == "bench") cmd_bench(*run);
        run->meta["status"] = "ok";
        run->meta["seconds"] = seconds_since(t0);
        run->save_meta();
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        if (run) {
            run->meta["status"] = "numerical failure";
            run->meta["error"] = e.what();
            run->save_meta();
        }
        return 2;
    } catch (const BudgetError& e) {
        std::cerr << "resource budget exceeded: " << e.what() << "\n";
        if (run) {
            run->meta["status"] = "budget exceeded";
            run->meta["error"] = e.what();
            run->save_meta();
        }
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
