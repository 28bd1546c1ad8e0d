#include "fedleak/param_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "fedleak/error.hpp"

namespace fedleak {

using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little,
              "parameter streams are little-endian; big-endian hosts need byte swaps");

void write_doubles(std::ofstream& out, std::span<const double> values) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::ifstream& in, std::size_t count, const std::string& path) {
    std::vector<double> values(count);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw FormatError(path + ": truncated parameter stream");
    return values;
}

json sidecar_for(const std::vector<BlockInfo>& blocks) {
    json j;
    j["format"] = "fedleak-params-v1";
    j["blocks"] = json::array();
    for (const auto& b : blocks) {
        j["blocks"].push_back({{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}});
    }
    return j;
}

std::vector<BlockInfo> blocks_from_sidecar(const std::filesystem::path& path) {
    std::ifstream side(path);
    if (!side) throw IoError(path.string() + ": cannot open sidecar");
    json j;
    try {
        side >> j;
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": bad sidecar JSON: " + e.what());
    }
    if (j.value("format", "") != "fedleak-params-v1") {
        throw FormatError(path.string() + ": unknown parameter stream format");
    }
    std::vector<BlockInfo> blocks;
    std::size_t offset = 0;
    for (const auto& item : j.at("blocks")) {
        BlockInfo info;
        info.name = item.at("name").get<std::string>();
        info.rows = item.at("rows").get<std::size_t>();
        info.cols = item.at("cols").get<std::size_t>();
        info.offset = offset;
        offset += info.rows * info.cols;
        blocks.push_back(std::move(info));
    }
    return blocks;
}

}  // namespace

std::size_t BlockLayout::total() const {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.rows * b.cols;
    return n;
}

const BlockInfo& BlockLayout::find(const std::string& name) const {
    for (const auto& b : blocks) {
        if (b.name == name) return b;
    }
    throw ShapeError("layout has no block named '" + name + "'");
}

bool BlockLayout::has(const std::string& name) const {
    for (const auto& b : blocks) {
        if (b.name == name) return true;
    }
    return false;
}

void save_param_stream(const std::filesystem::path& path, const std::vector<NamedMatrix>& blocks) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path.string() + ": cannot open for writing");
    std::vector<BlockInfo> infos;
    std::size_t offset = 0;
    for (const auto& b : blocks) {
        infos.push_back({b.name, b.value.rows(), b.value.cols(), offset});
        offset += b.value.size();
        write_doubles(out, b.value.data());
    }
    out.close();
    std::ofstream side(path.string() + ".json");
    if (!side) throw IoError(path.string() + ".json: cannot open for writing");
    side << sidecar_for(infos).dump(2) << "\n";
}

std::vector<NamedMatrix> load_param_stream(const std::filesystem::path& path) {
    const auto infos = blocks_from_sidecar(path.string() + ".json");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string() + ": cannot open");
    std::vector<NamedMatrix> out;
    for (const auto& info : infos) {
        auto values = read_doubles(in, info.rows * info.cols, path.string());
        out.push_back({info.name, Matrix(info.rows, info.cols, std::move(values))});
    }
    return out;
}

void save_flat_vector(const std::filesystem::path& path, const std::vector<double>& values,
                      const BlockLayout& layout) {
    if (values.size() != layout.total()) {
        throw ShapeError("flat vector length " + std::to_string(values.size()) +
                         " does not match layout total " + std::to_string(layout.total()));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path.string() + ": cannot open for writing");
    write_doubles(out, values);
    out.close();
    std::ofstream side(path.string() + ".json");
    if (!side) throw IoError(path.string() + ".json: cannot open for writing");
    side << sidecar_for(layout.blocks).dump(2) << "\n";
}

std::pair<std::vector<double>, BlockLayout> load_flat_vector(const std::filesystem::path& path) {
    BlockLayout layout{blocks_from_sidecar(path.string() + ".json")};
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string() + ": cannot open");
    auto values = read_doubles(in, layout.total(), path.string());
    return {std::move(values), std::move(layout)};
}

}  // namespace fedleak
