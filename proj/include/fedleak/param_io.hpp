#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "fedleak/matrix.hpp"

namespace fedleak {

struct BlockInfo {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;  // element offset into the flat stream
};

/// Canonical flattening order of a model's parameter blocks. The crafted
/// block always comes first: crafted.w1, crafted.b1, crafted.w2, crafted.b2,
/// then embedding (text models), then head blocks in depth order.
struct BlockLayout {
    std::vector<BlockInfo> blocks;

    std::size_t total() const;
    const BlockInfo& find(const std::string& name) const;  // throws ShapeError when absent
    bool has(const std::string& name) const;
};

struct NamedMatrix {
    std::string name;
    Matrix value;
};

/// Writes the blocks as a flat little-endian float64 stream at `path` with a
/// JSON sidecar at `path + ".json"` describing names and shapes. The format
/// is bit-exact: save followed by load reproduces every word.
void save_param_stream(const std::filesystem::path& path, const std::vector<NamedMatrix>& blocks);

std::vector<NamedMatrix> load_param_stream(const std::filesystem::path& path);

/// Writes a raw vector under a single block name (aggregate dumps reuse the
/// parameter stream format, with the sidecar carrying the full block layout
/// so offline tools can slice it).
void save_flat_vector(const std::filesystem::path& path, const std::vector<double>& values,
                      const BlockLayout& layout);

std::pair<std::vector<double>, BlockLayout> load_flat_vector(const std::filesystem::path& path);

}  // namespace fedleak
