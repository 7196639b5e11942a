// End-to-end acceptance checks, one line per criterion:
//   acceptance [--only N]
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "wavesens/config.hpp"
#include "wavesens/errors.hpp"
#include "wavesens/fwi.hpp"
#include "wavesens/sensitivity.hpp"
#include "wavesens/solver.hpp"
#include "wavesens/tato.hpp"

using namespace wavesens;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <class T>
double ulp_of(T x) {
    x = std::abs(x);
    return double(std::nextafter(x, std::numeric_limits<T>::infinity()) - x);
}

template <class T>
Field<T> random_field(const Grid& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Field<T> f(g);
    for (std::size_t i = 0; i < g.size(); ++i) f[i] = static_cast<T>(dist(rng));
    return f;
}

std::vector<double> random_gamma(std::size_t n, double lo, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(lo, 1.0);
    std::vector<double> g(n);
    for (auto& v : g) v = dist(rng);
    return g;
}

fs::path work_dir(const std::string& name) {
    auto dir = fs::path(WAVESENS_WORK_DIR) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string("\"") + WAVESENS_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::vector<std::vector<double>> read_csv(const fs::path& path) {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);  // header
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string config_path(const char* name) { return (fs::path(WAVESENS_SOURCE_DIR) / "configs" / name).string(); }

// 1 ---------------------------------------------------------------------------

Verdict bilinear_identity() {
    std::mt19937_64 rng(101);
    const std::size_t steps = 50;
    auto g = Grid::build({{33, 33}, 0.01});
    double worst = 0.0;  // residual in ulps of the largest term
    for (int trial = 0; trial < 10; ++trial) {
        auto gamma = random_gamma(g.size(), 0.05, rng);
        const double k = std::pow(10.0, std::uniform_real_distribution<double>(-2.0, 2.0)(rng));
        for (auto m : {MaterialModel::scalar(g, gamma, {}), MaterialModel::acoustic(g, gamma, {})}) {
            KernelCoefficients<double> c(m, 0.5 * g.spacing() / m.max_wave_speed());
            KernelAccumulator<double> ss(g, m.flavor()), aa(g, m.flavor()), ab(g, m.flavor()), bb(g, m.flavor());
            auto a_lo = random_field<double>(g, rng), b_lo = random_field<double>(g, rng);
            for (std::size_t j = 0; j < steps; ++j) {
                auto a_hi = random_field<double>(g, rng), b_hi = random_field<double>(g, rng);
                auto s_lo = a_lo, s_hi = a_hi;
                s_lo.add_scaled(b_lo, k);
                s_hi.add_scaled(b_hi, k);
                kernel_increment(ss, s_lo, s_hi, s_lo, s_hi, c, 1.0);
                kernel_increment(aa, a_lo, a_hi, a_lo, a_hi, c, 1.0);
                kernel_increment(ab, a_lo, a_hi, b_lo, b_hi, c, 1.0);
                kernel_increment(bb, b_lo, b_hi, b_lo, b_hi, c, 1.0);
                a_lo = std::move(a_hi);
                b_lo = std::move(b_hi);
            }
            double largest = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i)
                largest = std::max({largest, std::abs(ss.values[i]), std::abs(aa.values[i]),
                                    std::abs(2 * k * ab.values[i]), std::abs(k * k * bb.values[i])});
            const double ulp = ulp_of(largest);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double r = ss.values[i] - aa.values[i] - 2 * k * ab.values[i] - k * k * bb.values[i];
                worst = std::max(worst, std::abs(r) / ulp);
            }
        }
    }
    return {worst <= 8.0, fmt("max residual %.2f ulp of the largest term (limit 8), 10 histories x 2 flavors", worst)};
}

// 2 ---------------------------------------------------------------------------

Verdict time_reversal() {
    const std::size_t n = 101, steps = 500;
    const double dx = 2e-4;
    auto grid = Grid::build({{n, n}, dx});
    std::vector<double> gamma(grid.size(), 1.0);
    for (NodeIndex i = 0; i < grid.size(); ++i) {
        auto c = grid.coords(i);
        const double x = double(c[0]) - 60.0, y = double(c[1]) - 45.0;
        if (x * x + y * y < 100.0) gamma[i] = 1e-5;
    }
    auto material = MaterialModel::scalar(grid, gamma, {});
    TimeConfig time{steps, 0.5 * dx / material.max_wave_speed()};
    std::vector<SourceSpec> sources{{grid.index({25, 50, 0}), 1e12, 1e6, 2}};

    double peak = 0.0;
    ForwardOptions opt;
    opt.on_level = [&](std::size_t, std::span<const double> u) {
        for (double v : u) peak = std::max(peak, std::abs(v));
    };
    auto r = run_forward<double>(material, time, sources, nullptr, opt);
    Propagator<double> prop(material, time.dt);
    auto& w = r.window;
    w.reverse();
    run_backward<double>(prop, w, 0, [&](std::size_t level, std::vector<PointForce>& out) {
        source_forces(sources, level, time.dt, out);
    });
    const double err = std::max(w.cur().max_abs(), w.prev().max_abs());
    return {peak > 0.0 && w.level() == 0 && err <= 1e-10 * peak,
            fmt("max|u| after replay = %.3e x peak (limit 1e-10), peak %.3e", err / peak, peak)};
}

// 3 ---------------------------------------------------------------------------

Verdict gradient_oracles() {
    double worst_fwi = 0.0, worst_tato = 0.0;
    {
        const std::size_t n = 21, steps = 100;
        const double dx = 2e-4;
        auto grid = Grid::build({{n, n}, dx});
        std::mt19937_64 rng(7);
        auto material = MaterialModel::scalar(grid, random_gamma(grid.size(), 0.5, rng), {});
        TimeConfig time{steps, 0.5 * dx / 6000.0};
        std::vector<SourceSpec> sources{{grid.index({4, n / 2, 0}), 1e12, 2e6, 2}};
        std::vector<NodeIndex> sensors{grid.index({n - 4, n / 2, 0}), grid.index({n / 2, n - 4, 0}),
                                       grid.index({n / 2, 3, 0})};
        SensorArray rec(grid, sensors);
        run_forward<double>(MaterialModel::homogeneous_scalar(grid, {}), time, sources, &rec);
        FwiObjective obj(sensors, {rec.traces().begin(), rec.traces().end()}, steps, time.dt);
        Shot shot{sources, &obj};
        auto ref = gradient_reference(material, time, shot);

        std::vector<NodeIndex> nodes;
        std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
        while (nodes.size() < 5) {
            auto i = pick(rng);
            if (!grid.on_boundary(i)) nodes.push_back(i);
        }
        auto cost = [&](const std::vector<double>& gm) { return evaluate_cost(with_gamma(material, gm), time, shot); };
        std::vector<double> gamma(material.gamma().begin(), material.gamma().end());
        auto fd = gradient_fd_oracle(cost, gamma, nodes, 1e-4, 1e-5, 1.0);
        for (std::size_t i = 0; i < nodes.size(); ++i)
            worst_fwi = std::max(worst_fwi, std::abs(ref.gradient[nodes[i]] - fd[i]) / std::abs(fd[i]));
    }
    {
        TatoProblem p;
        p.grid = Grid::build({{31, 31}, 0.05});
        p.time = {150, 3.5e-5};
        const double dlo[] = {0.3, 0.3}, dhi[] = {0.7, 0.7}, slo[] = {0.8, 0.4}, shi[] = {0.95, 0.6};
        p.design.assign(p.grid.size(), 0);
        for (auto n : box_nodes(p.grid, dlo, dhi)) p.design[n] = 1;
        p.region = box_nodes(p.grid, slo, shi);
        p.sources = {{p.grid.index({2, 15, 0}), 1e2, 700.0, 2}};
        validate(p);
        DensityFilter filter(p.grid, p.design, p.filter_radius);

        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> dist(0.2, 0.8);
        std::vector<double> raw(p.grid.size(), 0.0);
        std::vector<NodeIndex> design_nodes;
        for (NodeIndex n = 0; n < p.grid.size(); ++n)
            if (p.design[n]) {
                raw[n] = dist(rng);
                design_nodes.push_back(n);
            }
        const double beta = 2.0;
        auto ref = tato_cost_gradient(p, filter, raw, beta, GradientMethod::Reference, {});
        std::vector<NodeIndex> nodes;
        std::sample(design_nodes.begin(), design_nodes.end(), std::back_inserter(nodes), 5, rng);
        auto cost = [&](const std::vector<double>& r) { return tato_cost(p, filter, r, beta); };
        auto fd = gradient_fd_oracle(cost, raw, nodes, 1e-4, 0.0, 1.0);
        for (std::size_t i = 0; i < nodes.size(); ++i)
            worst_tato = std::max(worst_tato, std::abs(ref.gradient[nodes[i]] - fd[i]) / std::abs(fd[i]));
    }
    return {worst_fwi <= 1e-2 && worst_tato <= 1e-2,
            fmt("max relative deviation from central differences: FWI toy %.2e, TATO toy %.2e (limit 1e-2)", worst_fwi,
                worst_tato)};
}

// 4 ---------------------------------------------------------------------------

struct Band {
    double hi = 0.0, lo = 0.0;  // largest and smallest agreeing k of the widest run
    double decades = -1.0;
};

Band widest_band(const std::vector<double>& ks, const std::vector<double>& err, double tol) {
    Band best;
    for (std::size_t i = 0; i < ks.size();) {
        if (!(err[i] < tol)) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < ks.size() && err[j + 1] < tol) ++j;
        const double span = std::log10(ks[i] / ks[j]);
        if (span > best.decades) best = {ks[i], ks[j], span};
        i = j + 1;
    }
    return best;
}

Verdict hockey_stick() {
    auto cfg = load_config(config_path("fwi_desk.toml"));
    cfg.sources.resize(1);
    auto problem = make_fwi_problem(cfg);
    auto& shot = problem.shots.front();
    FwiObjective obj(problem.sensors, shot.measured, problem.time.steps, problem.time.dt);
    Shot s{{shot.source}, &obj};
    const auto ref = gradient_reference(problem.initial, problem.time, s).gradient;

    std::vector<double> ks, es, ed;
    for (int e = 24; e >= -4; --e) {
        const double k = std::pow(10.0, e);
        double err[2];
        for (int p = 0; p < 2; ++p) {
            GradientOptions o;
            o.k = k;
            o.precision = p ? Precision::Double : Precision::Single;
            try {
                err[p] = relative_rms_error(gradient_superposed(problem.initial, problem.time, s, o).gradient, ref);
            } catch (const NumericalError&) {
                err[p] = std::numeric_limits<double>::infinity();
            }
            if (!std::isfinite(err[p])) err[p] = std::numeric_limits<double>::infinity();
        }
        ks.push_back(k);
        es.push_back(err[0]);
        ed.push_back(err[1]);
    }
    const auto bs = widest_band(ks, es, 0.05), bd = widest_band(ks, ed, 0.05);

    // Least squares slope of log error vs log k on the large-k flank (double precision,
    // points above the band with error between 1e-4 and 1).
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int count = 0;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        if (ed[i] < 1e-4 || ed[i] > 1.0 || ks[i] < std::sqrt(bd.hi * bd.lo)) continue;
        const double x = std::log10(ks[i]), y = std::log10(ed[i]);
        sx += x, sy += y, sxx += x * x, sxy += x * y, ++count;
    }
    const double slope = count >= 2 ? (count * sxy - sx * sy) / (count * sxx - sx * sx) : std::nan("");

    const bool pass = bs.decades >= 5.0 && bd.decades > bs.decades && std::abs(slope - 1.0) <= 0.2;
    std::cerr << "  k, rel_error_single, rel_error_double\n";
    for (std::size_t i = 0; i < ks.size(); ++i) std::cerr << fmt("  %.0e, %.3e, %.3e\n", ks[i], es[i], ed[i]);
    return {pass, fmt("5%% band: single %.0f decades (%.0e..%.0e, need >= 5), double %.0f decades (%.0e..%.0e); "
                      "large-k slope %.3f (need 1 +- 0.2)",
                      bs.decades, bs.lo, bs.hi, bd.decades, bd.lo, bd.hi, slope)};
}

// 5 ---------------------------------------------------------------------------

Verdict memory_contract() {
    const std::size_t n = 21;
    const double dx = 2e-4;
    auto grid = Grid::build({{n, n}, dx});
    auto material = MaterialModel::scalar(grid, std::vector<double>(grid.size(), 0.7), {});
    std::vector<SourceSpec> sources{{grid.index({4, n / 2, 0}), 1e12, 2e6, 2}};
    std::vector<NodeIndex> sensors{grid.index({n - 4, n / 2, 0})};

    auto shot_for = [&](std::size_t steps, std::unique_ptr<FwiObjective>& keep) {
        TimeConfig time{steps, 0.5 * dx / 6000.0};
        SensorArray rec(grid, sensors);
        run_forward<double>(MaterialModel::homogeneous_scalar(grid, {}), time, sources, &rec);
        keep = std::make_unique<FwiObjective>(sensors, std::vector<double>(rec.traces().begin(), rec.traces().end()),
                                              steps, time.dt);
        return std::make_pair(time, Shot{sources, keep.get()});
    };

    bool pass = true;
    std::string detail;
    for (std::size_t steps : {200u, 2000u}) {
        std::unique_ptr<FwiObjective> o1, o2;
        auto [t1, s1] = shot_for(steps, o1);
        auto [t2, s2] = shot_for(2 * steps, o2);
        GradientOptions opt;
        opt.k = 1e10;
        auto sup = gradient_superposed(material, t1, s1, opt);
        const auto h1 = gradient_reference(material, t1, s1).stats.history_bytes;
        const auto h2 = gradient_reference(material, t2, s2).stats.history_bytes;
        const double ratio = double(h2) / double(h1);
        pass = pass && sup.stats.peak_field_buffers == 4 && sup.stats.history_bytes == 0 &&
               std::abs(ratio - 2.0) <= 0.02;
        detail += fmt("%sN=%zu: superposed buffers %zu, reference history %zu B, ratio at 2N %.4f",
                      detail.empty() ? "" : "; ", steps, sup.stats.peak_field_buffers, h1, ratio);
    }
    return {pass, detail};
}

// 6 ---------------------------------------------------------------------------

template <class T>
double convolution_case(int dims, Flavor flavor, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> size(3, dims == 1 ? 40 : 12);
    std::vector<std::size_t> shape;
    for (int a = 0; a < dims; ++a) shape.push_back(size(rng));
    auto g = Grid::build({shape, 0.01});
    auto gamma = random_gamma(g.size(), flavor == Flavor::ScalarRhoScaled ? 1e-5 : 0.0, rng);
    auto m = flavor == Flavor::ScalarRhoScaled ? MaterialModel::scalar(g, gamma, {})
                                               : MaterialModel::acoustic(g, gamma, {});
    const double dt = 0.5 * 0.01 / m.max_wave_speed();
    Propagator<T> prop(m, dt);
    auto prev = random_field<T>(g, rng);
    auto cur = random_field<T>(g, rng);
    auto force = random_field<T>(g, rng);
    Field<T> a(g), b(g);
    prop.step(prev, cur, a, force);
    step_convolutional(m, dt, prev, cur, b, force);
    double worst = 0.0;
    for (NodeIndex i = 0; i < g.size(); ++i) {
        // largest term entering node i
        double scale = std::max({2.0 * std::abs(double(cur[i])), std::abs(double(prev[i])),
                                 std::abs(double(prop.force_factor(i) * force[i])), std::abs(double(a[i]))});
        double flux = 0.0;
        auto c = g.coords(i);
        for (int ax = 0; ax < dims; ++ax) {
            const auto s = g.stride(ax);
            if (c[ax] > 0) flux += std::abs(double(prop.face_weight(ax, i - s)) * double(cur[i - s] - cur[i]));
            if (c[ax] + 1 < g.extent(ax))
                flux += std::abs(double(prop.face_weight(ax, i)) * double(cur[i + s] - cur[i]));
        }
        scale = std::max(scale, double(prop.mass_factor(i)) * flux);
        worst = std::max(worst, std::abs(double(a[i]) - double(b[i])) / ulp_of(static_cast<T>(scale)));
    }
    return worst;
}

Verdict stencil_equivalence() {
    std::mt19937_64 rng(606);
    double worst = 0.0;
    int cases = 0;
    for (int trial = 0; trial < 25; ++trial)
        for (int dims : {1, 2})
            for (auto flavor : {Flavor::ScalarRhoScaled, Flavor::AcousticInterp}) {
                worst = std::max(worst, trial % 2 ? convolution_case<float>(dims, flavor, rng)
                                                  : convolution_case<double>(dims, flavor, rng));
                ++cases;
            }
    return {worst <= 4.0, fmt("%d single-step cases (1D/2D, both flavors, f32/f64): max deviation %.2f ulp (limit 4)",
                              cases, worst)};
}

// 7 ---------------------------------------------------------------------------

Verdict filter_projection() {
    bool pass = true;
    std::string detail;
    const double h0 = heaviside_project(0.0, 3.7, 0.5), h1 = heaviside_project(1.0, 3.7, 0.5);
    const double hm = heaviside_project(0.5, 3.7, 0.5);
    pass = pass && h0 == 0.0 && h1 == 1.0 && hm == 0.5;
    detail += fmt("H(0)=%g H(1)=%g H(0.5)=%g", h0, h1, hm);

    auto g = Grid::build({{11, 11}, 1.0});
    std::vector<double> spike(g.size(), 0.0);
    spike[g.index({5, 5, 0})] = 1.0;
    const double value = density_filter(g, spike, 1.5)[g.index({5, 5, 0})];
    const double expect = 1.5 / (3.5 + 4.0 * (1.5 - std::sqrt(2.0)));
    pass = pass && std::abs(value - expect) <= 1e-12;
    detail += fmt("; spike %.15f vs %.15f", value, expect);

    const BetaSchedule sched;
    const double b0 = beta_schedule(0, sched), b5 = beta_schedule(5, sched), b10 = beta_schedule(10, sched);
    pass = pass && std::abs(b0 - 1.0) <= 1e-15 && std::abs(b5 - 1.1) <= 1e-15 && std::abs(b10 - 1.21) <= 1e-15;
    detail += fmt("; beta(0,5,10) = (%g, %g, %g)", b0, b5, b10);
    return {pass, detail};
}

// 8 ---------------------------------------------------------------------------

Verdict fwi_end_to_end() {
    auto dir = work_dir("fwi");
    const auto t0 = std::chrono::steady_clock::now();
    const int rc = run_cli("invert -c \"" + config_path("fwi_desk.toml") + "\" --out \"" + dir.string() + "\"",
                           dir / "stdout.txt");
    const double secs = seconds_since(t0);
    if (rc != 0) return {false, fmt("wavesens invert exited with %d (see %s)", rc, (dir / "stdout.txt").c_str())};
    auto rows = read_csv(dir / "log.csv");
    if (rows.size() < 11) return {false, "log.csv has fewer than 11 rows"};
    bool decreasing = true;
    for (std::size_t i = 1; i <= 10; ++i) decreasing = decreasing && rows[i][1] < rows[i - 1][1];
    const double iou = rows.back()[3];
    const std::size_t iterations = static_cast<std::size_t>(rows.back()[0]);
    return {decreasing && iou >= 0.5 && iterations <= 100 && secs < 900.0,
            fmt("IoU %.3f after %zu iterations (need >= 0.5), cost %s over first 10, %.0f s (limit 900)", iou,
                iterations, decreasing ? "strictly decreasing" : "NOT strictly decreasing", secs)};
}

// 9 ---------------------------------------------------------------------------

Verdict tato_end_to_end() {
    bool pass = true;
    std::string detail;
    for (const char* name : {"tato_desk.toml", "tato_amplify.toml"}) {
        const bool amplify = std::string(name) == "tato_amplify.toml";
        auto dir = work_dir(amplify ? "tato_amplify" : "tato_suppress");
        const auto t0 = std::chrono::steady_clock::now();
        const int rc = run_cli("design -c \"" + config_path(name) + "\" --out \"" + dir.string() + "\"",
                               dir / "stdout.txt");
        const double secs = seconds_since(t0);
        if (!detail.empty()) detail += "; ";
        if (rc != 0) {
            pass = false;
            detail += fmt("%s: exit %d", name, rc);
            continue;
        }
        auto rows = read_csv(dir / "log.csv");
        const double baseline = rows.front()[1], final_cost = rows.back()[1];
        const double ratio = final_cost / baseline;  // amplify costs are negative energies
        const bool ok = (amplify ? ratio >= 1.5 : ratio <= 0.5) && rows.back()[0] <= 150 && secs < 1200.0;
        pass = pass && ok;
        detail += fmt("%s objective/baseline %.3f (need %s), %.0f s", amplify ? "amplify" : "suppress", ratio,
                      amplify ? ">= 1.5" : "<= 0.5", secs);
    }
    return {pass, detail};
}

// 10 --------------------------------------------------------------------------

const char* kDeterminismDesign = R"(
[problem]
kind = "tato"
seed = 5
[grid]
shape = [61, 31]
length = 18.0
[time]
steps = 200
dt = 2.0e-4
[[sources]]
node = [0, 15]
amplitude = 100.0
frequency = 200.0
[optimizer]
iterations = 3
[gradient]
method = "superposed"
precision = "single"
k = 0.01
[output]
dump_interval = 1
)";

std::vector<fs::path> dumps(const fs::path& dir) {
    std::vector<fs::path> out;
    for (auto& e : fs::recursive_directory_iterator(dir))
        if (e.path().extension() == ".bin") out.push_back(fs::relative(e.path(), dir));
    std::sort(out.begin(), out.end());
    return out;
}

bool same_bytes(const fs::path& a, const fs::path& b) {
    std::ifstream x(a, std::ios::binary), y(b, std::ios::binary);
    return std::equal(std::istreambuf_iterator<char>(x), std::istreambuf_iterator<char>(),
                      std::istreambuf_iterator<char>(y), std::istreambuf_iterator<char>());
}

Verdict determinism() {
    auto dir = work_dir("determinism");
    {
        std::ofstream(dir / "design.toml") << kDeterminismDesign;
    }
    struct Job {
        std::string name, args;
    };
    const std::vector<Job> jobs{
        {"forward", "forward -c \"" + config_path("forward_1d.toml") + "\" --precision double"},
        {"design", "design -c \"" + (dir / "design.toml").string() + "\" --precision single"},
    };
    bool pass = true;
    std::size_t compared = 0;
    std::string detail;
    for (const auto& job : jobs) {
        fs::path out[2];
        for (int r = 0; r < 2; ++r) {
            out[r] = dir / (job.name + "_" + std::to_string(r));
            const int rc = run_cli(job.args + " --threads 1 --seed 5 --out \"" + out[r].string() + "\"",
                                   dir / (job.name + "_" + std::to_string(r) + ".txt"));
            if (rc != 0) return {false, fmt("%s run %d exited with %d", job.name.c_str(), r, rc)};
        }
        const auto a = dumps(out[0]), b = dumps(out[1]);
        if (a.empty() || a != b) return {false, job.name + ": dump sets differ or are empty"};
        for (const auto& f : a) {
            ++compared;
            if (!same_bytes(out[0] / f, out[1] / f)) {
                pass = false;
                detail += job.name + "/" + f.string() + " differs; ";
            }
        }
    }
    return {pass, detail + fmt("%zu dumps compared across forward and design re-runs", compared)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    int only = 0;
    app.add_option("--only", only, "run a single criterion (1-10)")->check(CLI::Range(1, 10));
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        {"bilinear kernel identity", bilinear_identity},
        {"time reversibility", time_reversal},
        {"gradient vs finite differences", gradient_oracles},
        {"k sweep hockey stick", hockey_stick},
        {"memory contract", memory_contract},
        {"stencil equivalence", stencil_equivalence},
        {"filter/projection algebra", filter_projection},
        {"FWI end to end", fwi_end_to_end},
        {"TATO end to end", tato_end_to_end},
        {"determinism", determinism},
    };
    bool all = true;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (only && static_cast<int>(i) + 1 != only) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        all = all && v.pass;
        std::cout << "criterion " << i + 1 << " [" << criteria[i].first << "]: " << (v.pass ? "PASS" : "FAIL")
                  << " - " << v.detail << fmt(" (%.1f s)", seconds_since(t0)) << std::endl;
    }
    return all ? 0 : 1;
}
