#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wavesens/field.hpp"
#include "wavesens/grid.hpp"

namespace wavesens {

/// What the values of a dump are and where they sit in time.
struct DumpInfo {
    std::string quantity;  // "u", "gamma", "gradient", ...
    double dt = 0.0;
    long step = -1;        // -1 when not tied to a level
};

/**
 * Raw little-endian IEEE-754 dump `<stem>.bin` (row-major, x1 fastest) in the
 * given precision plus `<stem>.json` describing dims, dtype, endianness, axis
 * order, Δx, Δt and step. Throws std::runtime_error on I/O failure.
 */
void write_field(const std::filesystem::path& stem, const Grid& grid, std::span<const double> values,
                 Precision precision, const DumpInfo& info);

/// Reads a dump written by write_field back as doubles (checks the sidecar).
std::vector<double> read_field(const std::filesystem::path& stem);

/// Small CSV writer: header once, then rows of numbers at full precision.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
    void row(std::span<const double> values);
    void row(std::initializer_list<double> values) { row(std::span<const double>(values.begin(), values.size())); }
    void flush() { out_.flush(); }

private:
    std::ofstream out_;
    std::size_t columns_;
};

/// Traces as CSV (level, time, one column per sensor) and as an f64 dump (N_r × N).
void write_traces(const std::filesystem::path& stem, const Grid& grid, std::span<const NodeIndex> sensors,
                  std::span<const double> traces, std::size_t samples, double dt);

void write_json(const std::filesystem::path& path, const nlohmann::json& value);

/// Creates the directory (and parents); throws std::runtime_error on failure.
void ensure_directory(const std::filesystem::path& dir);

}  // namespace wavesens
