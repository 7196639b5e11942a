#include "wavesens/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "wavesens/errors.hpp"

namespace wavesens {

namespace {

std::string where(const toml::node* node) {
    if (!node) return "";
    const auto& src = node->source();
    const std::string file = src.path ? *src.path + " " : "";
    return file + "line " + std::to_string(src.begin.line) + ": ";
}

// Typed access to one table with key checking; errors carry the line.
class Section {
public:
    Section(const toml::table* table, std::string name, std::set<std::string> allowed)
        : table_(table), name_(std::move(name)) {
        if (!table_) return;
        for (const auto& [key, value] : *table_) {
            if (!allowed.count(std::string(key.str())))
                fail(&value, "unknown key '" + std::string(key.str()) + "'");
        }
    }

    bool present() const { return table_ != nullptr; }
    bool has(const std::string& key) const { return table_ && table_->get(key); }
    const toml::node* node(const std::string& key) const { return table_ ? table_->get(key) : nullptr; }

    [[noreturn]] void fail(const toml::node* at, const std::string& msg) const {
        throw ConfigError(where(at ? at : table_) + "[" + name_ + "] " + msg);
    }
    [[noreturn]] void missing(const std::string& key) const {
        throw ConfigError(where(table_) + "[" + name_ + "] missing required key '" + key + "'");
    }

    double number(const std::string& key, std::optional<double> fallback = {}) const {
        const auto* n = node(key);
        if (!n) {
            if (fallback) return *fallback;
            missing(key);
        }
        if (auto v = n->value<double>()) return *v;
        fail(n, "'" + key + "' must be a number");
    }

    long long integer(const std::string& key, std::optional<long long> fallback = {}) const {
        const auto* n = node(key);
        if (!n) {
            if (fallback) return *fallback;
            missing(key);
        }
        if (auto v = n->value_exact<int64_t>()) return *v;
        fail(n, "'" + key + "' must be an integer");
    }

    std::size_t count(const std::string& key, std::optional<std::size_t> fallback = {}) const {
        const auto v = integer(key, fallback ? std::optional<long long>(static_cast<long long>(*fallback))
                                             : std::optional<long long>{});
        if (v < 0) fail(node(key), "'" + key + "' must not be negative");
        return static_cast<std::size_t>(v);
    }

    std::string text(const std::string& key, std::optional<std::string> fallback = {}) const {
        const auto* n = node(key);
        if (!n) {
            if (fallback) return *fallback;
            missing(key);
        }
        if (auto v = n->value<std::string>()) return *v;
        fail(n, "'" + key + "' must be a string");
    }

    std::vector<double> numbers(const toml::node* n, const std::string& key) const {
        const auto* arr = n ? n->as_array() : nullptr;
        if (!arr) fail(n, "'" + key + "' must be an array of numbers");
        std::vector<double> out;
        for (const auto& e : *arr) {
            auto v = e.value<double>();
            if (!v) fail(&e, "'" + key + "' must contain numbers only");
            out.push_back(*v);
        }
        return out;
    }
    std::vector<double> numbers(const std::string& key) const {
        if (!has(key)) missing(key);
        return numbers(node(key), key);
    }

    std::vector<std::size_t> indices(const toml::node* n, const std::string& key) const {
        const auto* arr = n ? n->as_array() : nullptr;
        if (!arr) fail(n, "'" + key + "' must be an array of non-negative integers");
        std::vector<std::size_t> out;
        for (const auto& e : *arr) {
            auto v = e.value_exact<int64_t>();
            if (!v || *v < 0) fail(&e, "'" + key + "' must contain non-negative integers");
            out.push_back(static_cast<std::size_t>(*v));
        }
        return out;
    }

    const toml::table* table() const { return table_; }

private:
    const toml::table* table_;
    std::string name_;
};

const toml::table* sub(const toml::table& root, const char* key) {
    const auto* n = root.get(key);
    if (!n) return nullptr;
    if (!n->is_table()) throw ConfigError(where(n) + "'" + std::string(key) + "' must be a table");
    return n->as_table();
}

const toml::array* array_of_tables(const toml::table& root, const char* key) {
    const auto* n = root.get(key);
    if (!n) return nullptr;
    const auto* arr = n->as_array();
    if (!arr || !arr->is_array_of_tables())
        throw ConfigError(where(n) + "'" + std::string(key) + "' must be an array of tables ([[" + key + "]])");
    return arr;
}

NodeIndex node_of(const Section& s, const Grid& grid, const toml::node* n, const std::string& key) {
    auto idx = s.indices(n, key);
    if (idx.size() != static_cast<std::size_t>(grid.dims()))
        s.fail(n, "'" + key + "' needs " + std::to_string(grid.dims()) + " indices");
    Coords c{0, 0, 0};
    for (int a = 0; a < grid.dims(); ++a) c[a] = idx[a];
    if (!grid.contains(c)) s.fail(n, "'" + key + "' lies outside the grid");
    return grid.index(c);
}

std::vector<Inclusion> read_inclusions(const toml::table* parent, const std::string& name, const Grid& grid,
                                       nlohmann::json& echo) {
    std::vector<Inclusion> out;
    if (!parent) return out;
    const auto* arr = array_of_tables(*parent, "inclusions");
    if (!arr) return out;
    for (const auto& e : *arr) {
        Section s(e.as_table(), name + ".inclusions", {"center", "radius", "value"});
        Inclusion inc;
        inc.center = s.numbers("center");
        if (inc.center.size() != static_cast<std::size_t>(grid.dims()))
            s.fail(s.node("center"), "'center' needs one coordinate per axis");
        inc.radius = s.number("radius");
        if (!(inc.radius > 0.0)) s.fail(s.node("radius"), "'radius' must be positive");
        inc.value = s.number("value");
        echo.push_back({{"center", inc.center}, {"radius", inc.radius}, {"value", inc.value}});
        out.push_back(inc);
    }
    return out;
}

// Boxes are given as fractions of the domain length per axis.
std::vector<NodeIndex> read_box(const Section& s, const toml::node* n, const std::string& key, const Grid& grid,
                                nlohmann::json& echo) {
    const auto* t = n ? n->as_table() : nullptr;
    if (!t) s.fail(n, "'" + key + "' must be a table {lo = [...], hi = [...]}");
    Section box(t, key, {"lo", "hi"});
    auto lo = box.numbers("lo"), hi = box.numbers("hi");
    if (lo.size() != static_cast<std::size_t>(grid.dims()) || hi.size() != lo.size())
        box.fail(t, "'lo' and 'hi' need one fraction per axis");
    for (std::size_t a = 0; a < lo.size(); ++a)
        if (lo[a] < 0.0 || hi[a] > 1.0 || lo[a] > hi[a]) box.fail(t, "box fractions must satisfy 0 <= lo <= hi <= 1");
    echo.push_back({{"lo", lo}, {"hi", hi}});
    return box_nodes(grid, lo, hi);
}

std::vector<unsigned char> read_box_mask(const Section& s, const std::string& key, const Grid& grid,
                                         nlohmann::json& echo) {
    std::vector<unsigned char> mask;
    const auto* n = s.node(key);
    if (!n) return mask;
    const auto* arr = n->as_array();
    if (!arr) s.fail(n, "'" + key + "' must be an array of {lo, hi} tables");
    mask.assign(grid.size(), 0);
    echo = nlohmann::json::array();
    for (const auto& e : *arr)
        for (auto i : read_box(s, &e, key, grid, echo)) mask[i] = 1;
    return mask;
}

double parse_k(const Section& s, GradientConfig& g) {
    const auto* n = s.node("k");
    if (!n) return g.k;
    if (auto str = n->value<std::string>()) {
        if (*str != "calibrate") s.fail(n, "'k' must be a positive number or \"calibrate\"");
        g.calibrate = true;
        return g.k;
    }
    const double k = s.number("k");
    if (!(k > 0.0)) s.fail(n, "'k' must be positive");
    return k;
}

}  // namespace

std::string_view to_string(ProblemKind kind) {
    switch (kind) {
        case ProblemKind::Forward: return "forward";
        case ProblemKind::Fwi: return "fwi";
        case ProblemKind::Tato: return "tato";
    }
    return "?";
}

double worst_case_speed(const AcousticConstants& c) {
    const double rho[2] = {c.rho1, c.rho2}, kap[2] = {c.kappa1, c.kappa2};
    double c2 = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) c2 = std::max(c2, kap[i] * 2.0 / (rho[i] + rho[j]));
    return std::sqrt(c2);
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
    toml::table root;
    try {
        root = toml::parse(text, origin);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << origin << " line " << e.source().begin.line << ": " << e.description();
        throw ConfigError(msg.str());
    }
    static const std::set<std::string> sections{"problem", "grid",   "time",      "material", "sources",
                                                "sensors", "model",  "truth",     "embedding", "region",
                                                "filter",  "projection", "optimizer", "gradient", "output",
                                                "bench"};
    for (const auto& [key, value] : root)
        if (!sections.count(std::string(key.str())))
            throw ConfigError(where(&value) + "unknown section [" + std::string(key.str()) + "]");

    RunConfig cfg;
    nlohmann::json& echo = cfg.resolved;

    Section problem(sub(root, "problem"), "problem", {"kind", "flavor", "seed"});
    const std::string kind = problem.text("kind", "forward");
    if (kind == "forward") cfg.kind = ProblemKind::Forward;
    else if (kind == "fwi") cfg.kind = ProblemKind::Fwi;
    else if (kind == "tato") cfg.kind = ProblemKind::Tato;
    else problem.fail(problem.node("kind"), "'kind' must be forward, fwi or tato");
    const std::string default_flavor = cfg.kind == ProblemKind::Tato ? "acoustic" : "scalar";
    const std::string flavor = problem.text("flavor", default_flavor);
    if (flavor == "scalar") cfg.flavor = Flavor::ScalarRhoScaled;
    else if (flavor == "acoustic") cfg.flavor = Flavor::AcousticInterp;
    else problem.fail(problem.node("flavor"), "'flavor' must be scalar or acoustic");
    if (cfg.kind == ProblemKind::Fwi && cfg.flavor != Flavor::ScalarRhoScaled)
        problem.fail(problem.node("flavor"), "fwi problems use the scalar flavor");
    if (cfg.kind == ProblemKind::Tato && cfg.flavor != Flavor::AcousticInterp)
        problem.fail(problem.node("flavor"), "tato problems use the acoustic flavor");
    cfg.seed = static_cast<unsigned long>(problem.count("seed", 0));
    echo["problem"] = {{"kind", kind}, {"flavor", flavor}, {"seed", cfg.seed}};

    Section grid(sub(root, "grid"), "grid", {"shape", "spacing", "length"});
    if (!grid.present()) throw ConfigError("missing section [grid]");
    GridConfig gc;
    gc.shape = grid.indices(grid.node("shape"), "shape");
    if (grid.has("spacing") == grid.has("length")) grid.fail(nullptr, "give exactly one of 'spacing' or 'length'");
    if (gc.shape.empty() || gc.shape.size() > 3) grid.fail(grid.node("shape"), "'shape' needs 1 to 3 extents");
    if (grid.has("spacing")) {
        gc.spacing = grid.number("spacing");
    } else {
        const double L = grid.number("length");
        if (gc.shape[0] < 2) grid.fail(grid.node("shape"), "'shape' extents must be at least 3");
        gc.spacing = L / static_cast<double>(gc.shape[0] - 1);
    }
    try {
        cfg.grid = Grid::build(gc);
    } catch (const ConfigError& e) {
        grid.fail(grid.node("shape"), e.what());
    }
    echo["grid"] = {{"shape", gc.shape}, {"spacing", gc.spacing}};

    Section time(sub(root, "time"), "time", {"steps", "dt"});
    if (!time.present()) throw ConfigError("missing section [time]");
    cfg.time.steps = time.count("steps");
    cfg.time.dt = time.number("dt");
    if (cfg.time.steps == 0) time.fail(time.node("steps"), "'steps' must be at least 1");
    if (!(cfg.time.dt > 0.0)) time.fail(time.node("dt"), "'dt' must be positive");
    echo["time"] = {{"steps", cfg.time.steps}, {"dt", cfg.time.dt}};

    Section material(sub(root, "material"), "material",
                     {"rho0", "c0", "epsilon", "rho1", "kappa1", "rho2", "kappa2"});
    double speed = 0.0;
    if (cfg.flavor == Flavor::ScalarRhoScaled) {
        for (const char* k : {"rho1", "kappa1", "rho2", "kappa2"})
            if (material.has(k)) material.fail(material.node(k), std::string("'") + k + "' belongs to the acoustic flavor");
        cfg.scalar.rho0 = material.number("rho0", cfg.scalar.rho0);
        cfg.scalar.c0 = material.number("c0", cfg.scalar.c0);
        cfg.scalar.epsilon = material.number("epsilon", cfg.scalar.epsilon);
        if (!(cfg.scalar.rho0 > 0.0 && cfg.scalar.c0 > 0.0))
            material.fail(nullptr, "'rho0' and 'c0' must be positive");
        if (!(cfg.scalar.epsilon > 0.0 && cfg.scalar.epsilon < 1.0))
            material.fail(material.node("epsilon"), "'epsilon' must lie in (0, 1)");
        speed = cfg.scalar.c0;
        echo["material"] = {{"rho0", cfg.scalar.rho0}, {"c0", cfg.scalar.c0}, {"epsilon", cfg.scalar.epsilon}};
    } else {
        for (const char* k : {"rho0", "c0", "epsilon"})
            if (material.has(k)) material.fail(material.node(k), std::string("'") + k + "' belongs to the scalar flavor");
        auto& a = cfg.acoustic;
        a.rho1 = material.number("rho1", a.rho1);
        a.kappa1 = material.number("kappa1", a.kappa1);
        a.rho2 = material.number("rho2", a.rho2);
        a.kappa2 = material.number("kappa2", a.kappa2);
        if (!(a.rho1 > 0.0 && a.kappa1 > 0.0 && a.rho2 > 0.0 && a.kappa2 > 0.0))
            material.fail(nullptr, "densities and bulk moduli must be positive");
        speed = worst_case_speed(a);
        echo["material"] = {{"rho1", a.rho1}, {"kappa1", a.kappa1}, {"rho2", a.rho2}, {"kappa2", a.kappa2}};
    }
    const double courant = speed * cfg.time.dt / cfg.grid.spacing();
    const double limit = 1.0 / std::sqrt(static_cast<double>(cfg.grid.dims()));
    if (courant > limit) {
        std::ostringstream msg;
        msg << "'dt' = " << cfg.time.dt << " gives Courant number " << courant << " (wave speed " << speed
            << " m/s) above the stability limit " << limit;
        time.fail(time.node("dt"), msg.str());
    }
    echo["time"]["courant"] = courant;

    if (const auto* arr = array_of_tables(root, "sources")) {
        echo["sources"] = nlohmann::json::array();
        for (const auto& e : *arr) {
            Section s(e.as_table(), "sources", {"node", "amplitude", "frequency", "cycles"});
            SourceSpec src;
            if (!s.has("node")) s.missing("node");
            src.node = node_of(s, cfg.grid, s.node("node"), "node");
            src.amplitude = s.number("amplitude");
            src.frequency = s.number("frequency");
            src.cycles = static_cast<int>(s.integer("cycles", 2));
            try {
                validate(src, cfg.grid);
            } catch (const ConfigError& err) {
                s.fail(e.as_table(), err.what());
            }
            const auto c = cfg.grid.coords(src.node);
            echo["sources"].push_back({{"node", std::vector<std::size_t>(c.begin(), c.begin() + cfg.grid.dims())},
                                       {"amplitude", src.amplitude},
                                       {"frequency", src.frequency},
                                       {"cycles", src.cycles}});
            cfg.sources.push_back(src);
        }
    }
    if (cfg.sources.empty()) throw ConfigError("at least one [[sources]] entry is required");

    Section sensors(sub(root, "sensors"), "sensors", {"layout", "inset", "stride", "nodes"});
    if (sensors.present()) {
        const std::string layout = sensors.text("layout", sensors.has("nodes") ? "list" : "perimeter");
        if (layout == "perimeter") {
            if (cfg.grid.dims() != 2) sensors.fail(sensors.node("layout"), "perimeter layout needs a 2D grid");
            const auto inset = sensors.count("inset", 1), stride = sensors.count("stride", 4);
            if (stride == 0) sensors.fail(sensors.node("stride"), "'stride' must be at least 1");
            cfg.sensors = perimeter_sensors(cfg.grid, inset, stride);
            echo["sensors"] = {{"layout", layout}, {"inset", inset}, {"stride", stride}, {"count", cfg.sensors.size()}};
        } else if (layout == "list") {
            const auto* arr = sensors.node("nodes") ? sensors.node("nodes")->as_array() : nullptr;
            if (!arr) sensors.fail(sensors.node("nodes"), "'nodes' must be an array of index arrays");
            for (const auto& e : *arr) cfg.sensors.push_back(node_of(sensors, cfg.grid, &e, "nodes"));
            echo["sensors"] = {{"layout", layout}, {"count", cfg.sensors.size()}};
        } else {
            sensors.fail(sensors.node("layout"), "'layout' must be perimeter or list");
        }
        try {
            SensorArray check(cfg.grid, cfg.sensors);
        } catch (const ConfigError& e) {
            sensors.fail(nullptr, e.what());
        }
    }
    if (cfg.kind == ProblemKind::Fwi && cfg.sensors.empty()) throw ConfigError("fwi problems need [sensors]");

    const double lo_gamma = cfg.flavor == Flavor::ScalarRhoScaled ? cfg.scalar.epsilon : 0.0;
    auto check_gamma = [&](const Section& s, double v, const char* key) {
        if (!(v >= lo_gamma && v <= 1.0)) {
            std::ostringstream msg;
            msg << "'" << key << "' = " << v << " outside [" << lo_gamma << ", 1]";
            s.fail(s.node(key), msg.str());
        }
    };

    Section model(sub(root, "model"), "model", {"gamma", "inclusions"});
    cfg.model_gamma = model.number("gamma", cfg.kind == ProblemKind::Tato ? 0.0 : 1.0);
    check_gamma(model, cfg.model_gamma, "gamma");
    echo["model"] = {{"gamma", cfg.model_gamma}, {"inclusions", nlohmann::json::array()}};
    cfg.model_inclusions = read_inclusions(model.table(), "model", cfg.grid, echo["model"]["inclusions"]);
    for (const auto& inc : cfg.model_inclusions)
        if (!(inc.value >= lo_gamma && inc.value <= 1.0)) model.fail(nullptr, "inclusion value outside the indicator bounds");

    Section truth(sub(root, "truth"), "truth", {"background", "refine", "inclusions"});
    if (cfg.kind == ProblemKind::Fwi && !truth.present()) throw ConfigError("fwi problems need a [truth] section");
    cfg.truth_background = truth.number("background", 1.0);
    check_gamma(truth, cfg.truth_background, "background");
    cfg.refine = static_cast<int>(truth.integer("refine", 2));
    if (cfg.refine < 1) truth.fail(truth.node("refine"), "'refine' must be at least 1");
    echo["truth"] = {{"background", cfg.truth_background}, {"refine", cfg.refine}, {"inclusions", nlohmann::json::array()}};
    cfg.truth_inclusions = read_inclusions(truth.table(), "truth", cfg.grid, echo["truth"]["inclusions"]);
    for (const auto& inc : cfg.truth_inclusions)
        if (!(inc.value >= lo_gamma && inc.value <= 1.0)) truth.fail(nullptr, "inclusion value outside the indicator bounds");

    Section embedding(sub(root, "embedding"), "embedding", {"boxes"});
    nlohmann::json emb_echo = nlohmann::json::array();
    cfg.embedding = read_box_mask(embedding, "boxes", cfg.grid, emb_echo);
    echo["embedding"] = {{"boxes", emb_echo}};

    Section region(sub(root, "region"), "region", {"preset", "design", "objective"});
    if (cfg.kind == ProblemKind::Tato) {
        const std::string preset = region.text("preset", region.has("design") ? "none" : "black_hole");
        nlohmann::json design_echo = nlohmann::json::array(), objective_echo = nlohmann::json::array();
        if (preset == "black_hole") {
            if (cfg.grid.dims() != 2) region.fail(region.node("preset"), "black_hole preset needs a 2D grid");
            if (region.has("design") || region.has("objective"))
                region.fail(nullptr, "give either 'preset' or explicit 'design'/'objective' boxes");
            auto bh = black_hole_problem(cfg.grid.extent(0), cfg.grid.extent(1),
                                         cfg.grid.spacing() * static_cast<double>(cfg.grid.extent(0) - 1), cfg.time,
                                         cfg.sources.front().frequency, TatoMode::Suppress);
            cfg.design = bh.design;
            cfg.region = bh.region;
        } else if (preset == "none") {
            cfg.design = read_box_mask(region, "design", cfg.grid, design_echo);
            if (cfg.design.empty()) region.missing("design");
            if (!region.has("objective")) region.missing("objective");
            cfg.region = read_box(region, region.node("objective"), "objective", cfg.grid, objective_echo);
            for (auto n : cfg.region) cfg.design[n] = 0;
        } else {
            region.fail(region.node("preset"), "'preset' must be black_hole or none");
        }
        if (cfg.region.empty()) region.fail(nullptr, "objective region contains no nodes");
        if (std::none_of(cfg.design.begin(), cfg.design.end(), [](unsigned char v) { return v != 0; }))
            region.fail(nullptr, "design region contains no nodes");
        echo["region"] = {{"preset", preset}, {"design", design_echo}, {"objective", objective_echo},
                          {"design_nodes", std::count(cfg.design.begin(), cfg.design.end(), 1)},
                          {"objective_nodes", cfg.region.size()}};
    } else if (region.present()) {
        region.fail(nullptr, "[region] only applies to tato problems");
    }

    Section filter(sub(root, "filter"), "filter", {"radius"});
    cfg.filter_radius = filter.number("radius", 1.5);
    if (!(cfg.filter_radius > 0.0)) filter.fail(filter.node("radius"), "'radius' must be positive");
    Section projection(sub(root, "projection"), "projection", {"eta", "beta_initial", "beta_factor", "beta_interval"});
    cfg.eta = projection.number("eta", 0.5);
    if (!(cfg.eta > 0.0 && cfg.eta < 1.0)) projection.fail(projection.node("eta"), "'eta' must lie in (0, 1)");
    cfg.beta.initial = projection.number("beta_initial", 1.0);
    cfg.beta.factor = projection.number("beta_factor", 1.1);
    cfg.beta.interval = projection.count("beta_interval", 5);
    if (!(cfg.beta.initial > 0.0) || cfg.beta.factor < 1.0 || cfg.beta.interval == 0)
        projection.fail(nullptr, "beta schedule needs beta_initial > 0, beta_factor >= 1, beta_interval >= 1");
    if (cfg.kind == ProblemKind::Tato) {
        echo["filter"] = {{"radius", cfg.filter_radius}};
        echo["projection"] = {{"eta", cfg.eta},
                              {"beta_initial", cfg.beta.initial},
                              {"beta_factor", cfg.beta.factor},
                              {"beta_interval", cfg.beta.interval}};
    }

    Section opt(sub(root, "optimizer"), "optimizer",
                {"iterations", "alpha", "beta1", "beta2", "epsilon", "divergence_factor", "mode"});
    auto& o = cfg.optimizer;
    o.iterations = opt.count("iterations", cfg.kind == ProblemKind::Tato ? 150 : 100);
    o.adam.alpha = opt.number("alpha", cfg.kind == ProblemKind::Tato ? 0.1 : 0.05);
    o.adam.beta1 = opt.number("beta1", 0.9);
    o.adam.beta2 = opt.number("beta2", 0.999);
    o.adam.epsilon = opt.number("epsilon", 1e-8);
    o.divergence_factor = opt.number("divergence_factor", 10.0);
    if (!(o.adam.alpha > 0.0)) opt.fail(opt.node("alpha"), "'alpha' must be positive");
    if (!(o.adam.beta1 >= 0.0 && o.adam.beta1 < 1.0 && o.adam.beta2 >= 0.0 && o.adam.beta2 < 1.0))
        opt.fail(nullptr, "'beta1' and 'beta2' must lie in [0, 1)");
    if (!(o.adam.epsilon > 0.0)) opt.fail(opt.node("epsilon"), "'epsilon' must be positive");
    if (!(o.divergence_factor > 1.0)) opt.fail(opt.node("divergence_factor"), "'divergence_factor' must exceed 1");
    if (opt.has("mode")) {
        try {
            cfg.mode = parse_tato_mode(opt.text("mode"));
        } catch (const ConfigError& e) {
            opt.fail(opt.node("mode"), e.what());
        }
    }
    echo["optimizer"] = {{"iterations", o.iterations}, {"alpha", o.adam.alpha},   {"beta1", o.adam.beta1},
                         {"beta2", o.adam.beta2},        {"epsilon", o.adam.epsilon}, {"divergence_factor", o.divergence_factor}};
    if (cfg.kind == ProblemKind::Tato) echo["optimizer"]["mode"] = std::string(to_string(cfg.mode));

    Section grad(sub(root, "gradient"), "gradient",
                 {"method", "precision", "k", "k_start", "tolerance", "max_decades", "sweep_k_max", "sweep_k_min"});
    auto& g = cfg.gradient;
    try {
        g.method = parse_gradient_method(grad.text("method", "superposed"));
        g.precision = parse_precision(grad.text("precision", "single"));
    } catch (const ConfigError& e) {
        grad.fail(nullptr, e.what());
    }
    g.k = parse_k(grad, g);
    g.calibration.k_start = grad.number("k_start", 1e20);
    g.calibration.tolerance = grad.number("tolerance", 1e-2);
    g.calibration.max_decades = static_cast<int>(grad.integer("max_decades", 22));
    if (!(g.calibration.k_start > 0.0) || !(g.calibration.tolerance > 0.0) || g.calibration.max_decades < 1)
        grad.fail(nullptr, "calibration needs k_start > 0, tolerance > 0, max_decades >= 1");
    const double kmax = grad.number("sweep_k_max", 1e20), kmin = grad.number("sweep_k_min", 1e-1);
    if (!(kmax > 0.0 && kmin > 0.0 && kmin <= kmax)) grad.fail(nullptr, "need 0 < sweep_k_min <= sweep_k_max");
    const int decades = static_cast<int>(std::round(std::log10(kmax / kmin)));
    for (int i = 0; i <= decades; ++i) g.sweep_k.push_back(kmax / std::pow(10.0, i));
    echo["gradient"] = {{"method", g.method == GradientMethod::Reference ? "reference" : "superposed"},
                        {"precision", std::string(to_string(g.precision))},
                        {"k", g.calibrate ? nlohmann::json("calibrate") : nlohmann::json(g.k)},
                        {"k_start", g.calibration.k_start},
                        {"tolerance", g.calibration.tolerance},
                        {"max_decades", g.calibration.max_decades},
                        {"sweep_k_max", kmax},
                        {"sweep_k_min", kmin}};

    Section out(sub(root, "output"), "output", {"dir", "dump_interval"});
    cfg.output.dir = out.text("dir", "out");
    cfg.output.dump_interval = out.count("dump_interval", 0);
    echo["output"] = {{"dir", cfg.output.dir.string()}, {"dump_interval", cfg.output.dump_interval}};

    Section bench(sub(root, "bench"), "bench", {"sizes", "steps"});
    if (bench.has("sizes")) cfg.bench.sizes = bench.indices(bench.node("sizes"), "sizes");
    cfg.bench.steps = bench.count("steps", cfg.bench.steps);
    for (auto s : cfg.bench.sizes)
        if (s < 3) bench.fail(bench.node("sizes"), "bench sizes must be at least 3");
    if (cfg.bench.steps == 0) bench.fail(bench.node("steps"), "'steps' must be at least 1");
    echo["bench"] = {{"sizes", cfg.bench.sizes}, {"steps", cfg.bench.steps}};
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.string());
}

std::vector<double> paint_gamma(const Grid& grid, double background, const std::vector<Inclusion>& inclusions) {
    std::vector<double> gamma(grid.size(), background);
    for (NodeIndex n = 0; n < grid.size(); ++n) {
        const auto c = grid.coords(n);
        for (const auto& inc : inclusions) {
            double r2 = 0.0;
            for (int a = 0; a < grid.dims(); ++a) {
                const double d = static_cast<double>(c[a]) - inc.center[a];
                r2 += d * d;
            }
            if (r2 < inc.radius * inc.radius) gamma[n] = inc.value;
        }
    }
    return gamma;
}

MaterialModel make_model(const RunConfig& config) {
    auto gamma = paint_gamma(config.grid, config.model_gamma, config.model_inclusions);
    if (config.flavor == Flavor::ScalarRhoScaled) {
        if (!config.embedding.empty())
            for (NodeIndex n = 0; n < gamma.size(); ++n)
                if (config.embedding[n]) gamma[n] = config.scalar.epsilon;
        return MaterialModel::scalar(config.grid, std::move(gamma), config.scalar);
    }
    return MaterialModel::acoustic(config.grid, std::move(gamma), config.acoustic);
}

MaterialModel make_truth(const RunConfig& config) {
    auto gamma = paint_gamma(config.grid, config.truth_background, config.truth_inclusions);
    if (config.flavor == Flavor::ScalarRhoScaled) {
        if (!config.embedding.empty())
            for (NodeIndex n = 0; n < gamma.size(); ++n)
                if (config.embedding[n]) gamma[n] = config.scalar.epsilon;
        return MaterialModel::scalar(config.grid, std::move(gamma), config.scalar);
    }
    return MaterialModel::acoustic(config.grid, std::move(gamma), config.acoustic);
}

std::vector<unsigned char> truth_void_mask(const RunConfig& config) {
    const auto truth = make_truth(config);
    std::vector<unsigned char> mask(truth.grid().size());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = truth.gamma()[i] < 0.5;
    return mask;
}

FwiProblem make_fwi_problem(const RunConfig& config) {
    if (config.kind != ProblemKind::Fwi) throw ConfigError("config does not describe an fwi problem");
    const auto truth = make_truth(config);
    FwiProblem p{make_model(config), config.time, config.sensors, {}, config.embedding};
    for (const auto& src : config.sources) {
        const SourceSpec one[] = {src};
        auto rec = synthesize_measurements(truth, config.time, one, config.sensors, config.refine);
        p.shots.push_back({src, {rec.traces().begin(), rec.traces().end()}});
    }
    return p;
}

TatoProblem make_tato_problem(const RunConfig& config) {
    if (config.kind != ProblemKind::Tato) throw ConfigError("config does not describe a tato problem");
    TatoProblem p;
    p.grid = config.grid;
    p.time = config.time;
    p.constants = config.acoustic;
    p.design = config.design;
    p.region = config.region;
    p.sources = config.sources;
    p.filter_radius = config.filter_radius;
    p.eta = config.eta;
    p.beta = config.beta;
    p.mode = config.mode;
    validate(p);
    return p;
}

}  // namespace wavesens
