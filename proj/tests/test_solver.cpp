#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "wavesens/errors.hpp"
#include "wavesens/solver.hpp"

using namespace wavesens;

namespace {

std::vector<double> random_gamma(std::size_t n, double lo, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(lo, 1.0);
    std::vector<double> g(n);
    for (auto& v : g) v = dist(rng);
    return g;
}

template <class T>
Field<T> random_field(const Grid& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Field<T> f(g);
    for (std::size_t i = 0; i < g.size(); ++i) f[i] = static_cast<T>(dist(rng));
    return f;
}

// Desk FWI-like setting on a square grid.
struct DeskCase {
    Grid grid;
    MaterialModel material;
    TimeConfig time;
    std::vector<SourceSpec> sources;
};

DeskCase desk_case(std::size_t n, std::size_t steps) {
    const double dx = 2e-4;
    auto grid = Grid::build({{n, n}, dx});
    std::vector<double> gamma(grid.size(), 1.0);
    for (NodeIndex i = 0; i < grid.size(); ++i) {
        auto c = grid.coords(i);
        const double x = static_cast<double>(c[0]) - 0.6 * n, y = static_cast<double>(c[1]) - 0.45 * n;
        if (x * x + y * y < 0.01 * n * n) gamma[i] = 1e-5;
    }
    auto material = MaterialModel::scalar(grid, gamma, {});
    TimeConfig time{steps, 0.5 * dx / 6000.0};
    std::vector<SourceSpec> sources{{grid.index({n / 4, n / 2, 0}), 1e12, 1e6, 2}};
    return {grid, material, time, sources};
}

}  // namespace

TEST(Stencil, ConstantFieldIsPreserved) {
    std::mt19937_64 rng(3);
    for (auto flavor : {Flavor::ScalarRhoScaled, Flavor::AcousticInterp}) {
        auto g = Grid::build({{9, 7}, 0.01});
        auto gamma = random_gamma(g.size(), 1e-5, rng);
        auto m = flavor == Flavor::ScalarRhoScaled ? MaterialModel::scalar(g, gamma, {})
                                                   : MaterialModel::acoustic(g, gamma, {});
        Propagator<double> prop(m, 1e-7);
        Field<double> prev(g, 0.37), cur(g, 0.37), next(g);
        prop.step(prev, cur, next, std::span<const PointForce>{});
        for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(next[i], 0.37);
    }
}

TEST(Stencil, SingleForceResponse) {
    auto g = Grid::build({{5, 5}, 0.1});
    std::vector<double> gamma(g.size(), 0.25);
    auto m = MaterialModel::scalar(g, gamma, {});
    const double dt = 1e-6;
    Propagator<double> prop(m, dt);
    Field<double> prev(g), cur(g), next(g);
    std::vector<PointForce> f{{12, 1.0}};
    prop.step(prev, cur, next, f);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double expect = i == 12 ? dt * dt / (2700.0 * 0.25) : 0.0;
        EXPECT_DOUBLE_EQ(next[i], expect);
    }
}

TEST(Stencil, DalembertTranslationAtUnitCourant) {
    const std::size_t n = 201;
    auto g = Grid::build({{n}, 1.0});
    auto m = MaterialModel::homogeneous_scalar(g, {1.0, 1.0, 1e-5});
    Propagator<double> prop(m, 1.0);
    auto pulse = [](double x) { return std::abs(x) < 10 ? std::pow(std::cos(M_PI * x / 20.0), 2) : 0.0; };
    // Right-travelling wave: u(x, t) = p(x − t).
    Field<double> prev(g), cur(g);
    for (std::size_t i = 0; i < n; ++i) {
        prev[i] = pulse(static_cast<double>(i) - 50.0 + 1.0);
        cur[i] = pulse(static_cast<double>(i) - 50.0);
    }
    SolverWindow<double> w(std::move(prev), std::move(cur), 1, +1);
    for (int s = 0; s < 80; ++s) w.advance(prop, {});
    for (std::size_t i = 0; i < n; ++i) {
        EXPECT_NEAR(w.cur()[i], pulse(static_cast<double>(i) - 130.0), 1e-14) << i;
    }
}

TEST(Stencil, NoNetFluxThroughBoundary) {
    std::mt19937_64 rng(11);
    auto g = Grid::build({{13, 17}, 0.01});
    auto m = MaterialModel::acoustic(g, random_gamma(g.size(), 0.0, rng), {});
    Propagator<double> prop(m, 1e-7);
    auto prev = random_field<double>(g, rng);
    auto cur = random_field<double>(g, rng);
    Field<double> next(g);
    prop.step(prev, cur, next, std::span<const PointForce>{});
    // Σ M (u⁺ − 2u + u⁻) vanishes when no face leaves the domain.
    double total = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double term = (next[i] - 2.0 * cur[i] + prev[i]) / prop.mass_factor(i);
        total += term;
        scale += std::abs(term);
    }
    EXPECT_LE(std::abs(total), 1e-12 * scale);
}

TEST(Stencil, Linearity) {
    std::mt19937_64 rng(5);
    auto g = Grid::build({{11, 11}, 0.01});
    auto m = MaterialModel::scalar(g, random_gamma(g.size(), 0.1, rng), {1.0, 1.0, 1e-5});
    Propagator<double> prop(m, 0.004);
    auto run = [&](double a, double b) {
        SolverWindow<double> w(g, 1);
        for (std::size_t n = 1; n < 60; ++n) {
            std::vector<PointForce> f{{17, a * std::sin(0.3 * n)}, {90, b * std::cos(0.2 * n)}};
            w.advance(prop, f);
        }
        return w.cur().to_double();
    };
    auto u1 = run(1.0, 0.0), u2 = run(0.0, 1.0), u12 = run(2.0, -3.0);
    double peak = 0.0;
    for (double v : u12) peak = std::max(peak, std::abs(v));
    for (std::size_t i = 0; i < u12.size(); ++i) EXPECT_NEAR(u12[i], 2.0 * u1[i] - 3.0 * u2[i], 1e-12 * peak);
}

template <class T>
void check_convolution_form(int dims, Flavor flavor, std::mt19937_64& rng) {
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
    for (NodeIndex i = 0; i < g.size(); ++i) {
        // Largest term entering node i.
        double scale = std::max({2.0 * std::abs(double(cur[i])), std::abs(double(prev[i])),
                                 std::abs(double(prop.force_factor(i) * force[i])), std::abs(double(a[i]))});
        double flux = 0.0;
        auto c = g.coords(i);
        for (int ax = 0; ax < dims; ++ax) {
            const auto s = g.stride(ax);
            if (c[ax] > 0) flux += std::abs(double(prop.face_weight(ax, i - s)) * double(cur[i - s] - cur[i]));
            if (c[ax] + 1 < g.extent(ax)) flux += std::abs(double(prop.face_weight(ax, i)) * double(cur[i + s] - cur[i]));
        }
        scale = std::max(scale, double(prop.mass_factor(i)) * flux);
        const T s = static_cast<T>(scale);
        const double ulp = double(std::nextafter(s, std::numeric_limits<T>::infinity()) - s);
        ASSERT_LE(std::abs(double(a[i]) - double(b[i])), 4.0 * ulp) << "node " << i << " dims " << dims;
    }
}

TEST(Stencil, ConvolutionFormAgrees) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 25; ++trial) {
        for (int dims : {1, 2}) {
            for (auto flavor : {Flavor::ScalarRhoScaled, Flavor::AcousticInterp}) {
                check_convolution_form<double>(dims, flavor, rng);
                check_convolution_form<float>(dims, flavor, rng);
            }
        }
    }
}

TEST(Solver, ZeroSourcesGiveZeroTraces) {
    auto c = desk_case(21, 50);
    SensorArray sensors(c.grid, {5, 100, 300});
    auto r = run_forward<double>(c.material, c.time, {}, &sensors);
    for (double v : sensors.traces()) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(sensors.samples(), 50u);
    EXPECT_EQ(r.window.level(), 50u);
}

TEST(Solver, HistoryBudgetFailsFast) {
    auto c = desk_case(41, 400);
    ForwardOptions opt;
    opt.mode = RecorderMode::FullHistory;
    opt.history_budget = 1000;
    EXPECT_THROW(run_forward<double>(c.material, c.time, c.sources, nullptr, opt), BudgetError);
    opt.history_budget = history_footprint(c.grid, c.time, Precision::Double);
    auto r = run_forward<double>(c.material, c.time, c.sources, nullptr, opt);
    EXPECT_EQ(r.history.size(), 400u);
}

TEST(Solver, UnstableCourantIsDetected) {
    auto c = desk_case(31, 400);
    TimeConfig fast{400, 3.0 * c.time.dt};
    try {
        run_forward<double>(c.material, fast, c.sources, nullptr);
        FAIL() << "expected instability";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("max|u|"), std::string::npos);
    }
}

template <class T>
double round_trip_error(std::size_t n, std::size_t steps, double* peak_out) {
    auto c = desk_case(n, steps);
    double peak = 0.0;
    ForwardOptions opt;
    opt.on_level = [&](std::size_t, std::span<const double> u) {
        for (double v : u) peak = std::max(peak, std::abs(v));
    };
    auto r = run_forward<T>(c.material, c.time, c.sources, nullptr, opt);
    Propagator<T> prop(c.material, c.time.dt);
    auto& w = r.window;
    w.reverse();
    run_backward<T>(prop, w, 0, [&](std::size_t level, std::vector<PointForce>& out) {
        source_forces(c.sources, level, c.time.dt, out);
    });
    EXPECT_EQ(w.level(), 0u);
    *peak_out = peak;
    return std::max<double>(w.cur().max_abs(), w.prev().max_abs());
}

TEST(Solver, TimeReversalRoundTripDouble) {
    double peak = 0.0;
    const double err = round_trip_error<double>(101, 100, &peak);
    EXPECT_GT(peak, 0.0);
    EXPECT_LE(err, 1e-10 * peak);
}

TEST(Solver, TimeReversalRoundTripSingle) {
    double peak = 0.0, peak_d = 0.0;
    const double err = round_trip_error<float>(101, 500, &peak);
    const double err_d = round_trip_error<double>(101, 500, &peak_d);
    EXPECT_LE(err, 1e-4 * peak);
    EXPECT_GT(err / peak, err_d / peak_d);
}

TEST(Solver, BackwardFromZeroStaysZero) {
    auto c = desk_case(15, 30);
    Propagator<double> prop(c.material, c.time.dt);
    SolverWindow<double> w(Field<double>(c.grid), Field<double>(c.grid), 30, -1);
    run_backward<double>(prop, w, 0, {});
    EXPECT_EQ(w.cur().max_abs(), 0.0);
}
