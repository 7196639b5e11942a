#include "wavesens/io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <iomanip>
#include <limits>
#include <stdexcept>

namespace wavesens {

namespace {

template <class T>
void put_le(std::ofstream& out, T v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(const unsigned char* p) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* ext) {
    return std::filesystem::path(stem.string() + ext);
}

}  // namespace

void ensure_directory(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_json(const std::filesystem::path& path, const nlohmann::json& value) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << value.dump(2) << '\n';
}

void write_field(const std::filesystem::path& stem, const Grid& grid, std::span<const double> values,
                 Precision precision, const DumpInfo& info) {
    if (values.size() != grid.size()) throw std::invalid_argument("write_field: size does not match grid");
    const auto bin = with_suffix(stem, ".bin");
    std::ofstream out(bin, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + bin.string());
    for (double v : values) {
        if (precision == Precision::Single)
            put_le(out, static_cast<float>(v));
        else
            put_le(out, v);
    }
    if (!out) throw std::runtime_error("write failed for " + bin.string());

    nlohmann::json side;
    side["file"] = bin.filename().string();
    side["quantity"] = info.quantity;
    side["dims"] = grid.shape();
    side["dtype"] = precision == Precision::Single ? "float32" : "float64";
    side["endianness"] = "little";
    side["axis_order"] = "x1 fastest (row-major in (x3, x2, x1))";
    side["dx"] = grid.spacing();
    side["dt"] = info.dt;
    if (info.step >= 0) {
        side["step"] = info.step;
        side["time"] = static_cast<double>(info.step) * info.dt;
    } else {
        side["step"] = nullptr;
    }
    write_json(with_suffix(stem, ".json"), side);
}

std::vector<double> read_field(const std::filesystem::path& stem) {
    std::ifstream js(with_suffix(stem, ".json"));
    if (!js) throw std::runtime_error("missing sidecar for " + stem.string());
    const auto side = nlohmann::json::parse(js);
    std::size_t count = 1;
    for (auto d : side.at("dims")) count *= d.get<std::size_t>();
    const bool single = side.at("dtype") == "float32";
    const std::size_t width = single ? 4 : 8;

    std::ifstream in(with_suffix(stem, ".bin"), std::ios::binary);
    std::vector<unsigned char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (raw.size() != count * width) throw std::runtime_error("dump size does not match sidecar: " + stem.string());
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i)
        out[i] = single ? get_le<float>(&raw[i * width]) : get_le<double>(&raw[i * width]);
    return out;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path), columns_(header.size()) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
}

void CsvWriter::row(std::span<const double> values) {
    if (values.size() != columns_) throw std::invalid_argument("csv row has the wrong number of columns");
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << values[i];
    out_ << '\n';
}

void write_traces(const std::filesystem::path& stem, const Grid& grid, std::span<const NodeIndex> sensors,
                  std::span<const double> traces, std::size_t samples, double dt) {
    if (traces.size() != sensors.size() * samples) throw std::invalid_argument("write_traces: shape mismatch");
    std::vector<std::string> header{"level", "time"};
    for (auto n : sensors) header.push_back("node_" + std::to_string(n));
    CsvWriter csv(with_suffix(stem, ".csv"), header);
    std::vector<double> row(header.size());
    for (std::size_t j = 0; j < samples; ++j) {
        row[0] = static_cast<double>(j + 1);
        row[1] = static_cast<double>(j + 1) * dt;
        for (std::size_t s = 0; s < sensors.size(); ++s) row[2 + s] = traces[s * samples + j];
        csv.row(row);
    }

    const auto bin = with_suffix(stem, ".bin");
    std::ofstream out(bin, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + bin.string());
    for (double v : traces) put_le(out, v);

    nlohmann::json side;
    side["file"] = bin.filename().string();
    side["quantity"] = "traces";
    side["dims"] = {sensors.size(), samples};
    side["dtype"] = "float64";
    side["endianness"] = "little";
    side["axis_order"] = "sensor-major: sample j of sensor s at s*N + j, sample j is level j+1";
    side["dx"] = grid.spacing();
    side["dt"] = dt;
    side["sensor_nodes"] = std::vector<NodeIndex>(sensors.begin(), sensors.end());
    std::vector<std::vector<std::size_t>> coords;
    for (auto n : sensors) {
        const auto c = grid.coords(n);
        coords.emplace_back(c.begin(), c.begin() + grid.dims());
    }
    side["sensor_coords"] = coords;
    write_json(with_suffix(stem, ".json"), side);
}

}  // namespace wavesens
