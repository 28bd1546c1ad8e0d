#pragma once

#include <stdexcept>
#include <string>

namespace fedleak {

// Shape/dimension violations in tensor and layout operations.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input files (IDX, PGM, text corpus, parameter streams).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid run configuration (bad counts, ranges, or field combinations).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Violations of the aggregation protocol (length or checksum mismatches).
struct ProtocolError : std::runtime_error {
    explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem failures distinct from parse failures.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

struct IndexError : std::out_of_range {
    explicit IndexError(const std::string& what) : std::out_of_range(what) {}
};

}  // namespace fedleak
