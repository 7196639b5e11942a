#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wavesens/fwi.hpp"
#include "wavesens/material.hpp"
#include "wavesens/sensitivity.hpp"
#include "wavesens/source.hpp"
#include "wavesens/tato.hpp"

namespace wavesens {

enum class ProblemKind { Forward, Fwi, Tato };

struct GradientConfig {
    GradientMethod method = GradientMethod::Superposed;
    Precision precision = Precision::Single;
    double k = 1.0;
    bool calibrate = false;  // k = "calibrate"
    CalibrationOptions calibration;
    std::vector<double> sweep_k;  // ksweep values, largest first
};

struct OptimizerConfig {
    std::size_t iterations = 100;
    AdamSettings adam;
    double divergence_factor = 10.0;
};

struct OutputConfig {
    std::filesystem::path dir = "out";
    std::size_t dump_interval = 0;  // 0 = no periodic dumps
};

struct BenchConfig {
    std::vector<std::size_t> sizes{64, 128, 256};  // nodes per axis
    std::size_t steps = 200;
};

/// Disk of indicator `value` in node units (2D) or ball (3D).
struct Inclusion {
    std::vector<double> center;
    double radius = 0.0;
    double value = 0.0;
};

/**
 * Fully resolved run description. Everything is validated while loading;
 * errors name the offending key and its line.
 */
struct RunConfig {
    ProblemKind kind = ProblemKind::Forward;
    Flavor flavor = Flavor::ScalarRhoScaled;
    Grid grid;
    TimeConfig time;
    ScalarConstants scalar;
    AcousticConstants acoustic;
    std::vector<SourceSpec> sources;
    std::vector<NodeIndex> sensors;

    // model used by forward/gradient runs and as the FWI start
    double model_gamma = 1.0;
    std::vector<Inclusion> model_inclusions;

    // FWI synthetic truth
    double truth_background = 1.0;
    std::vector<Inclusion> truth_inclusions;
    int refine = 2;
    std::vector<unsigned char> embedding;

    // TATO
    std::vector<unsigned char> design;
    std::vector<NodeIndex> region;
    double filter_radius = 1.5;
    double eta = 0.5;
    BetaSchedule beta;
    TatoMode mode = TatoMode::Suppress;

    OptimizerConfig optimizer;
    GradientConfig gradient;
    OutputConfig output;
    BenchConfig bench;
    unsigned long seed = 0;

    nlohmann::json resolved;  // echo of the effective settings for metadata
};

/// Parse and validate a TOML document. Throws ConfigError.
RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_config(const std::filesystem::path& path);

std::string_view to_string(ProblemKind kind);

/// Indicator field of a background value with inclusions painted on top.
std::vector<double> paint_gamma(const Grid& grid, double background, const std::vector<Inclusion>& inclusions);

MaterialModel make_model(const RunConfig& config);
MaterialModel make_truth(const RunConfig& config);
/// Void mask of the truth (γ below 0.5).
std::vector<unsigned char> truth_void_mask(const RunConfig& config);
/// One shot per source with synthesized (refined-grid) measurements.
FwiProblem make_fwi_problem(const RunConfig& config);
TatoProblem make_tato_problem(const RunConfig& config);

/// Upper bound of the face wave speed over any air/solid arrangement.
double worst_case_speed(const AcousticConstants& constants);

}  // namespace wavesens
