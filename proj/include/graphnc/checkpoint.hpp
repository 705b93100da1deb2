#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "graphnc/common.hpp"

namespace graphnc::calib {

// Binary model container: magic bytes "GNC1"; a little-endian u64 byte count
// followed by that many bytes of text metadata ("key=value\n" lines); then
// the parameter blocks concatenated as raw little-endian 64-bit reals, in the
// order fixed by each model kind (the metadata carries the dimensions needed
// to slice them back apart).
struct CheckpointData {
    std::vector<std::pair<std::string, std::string>> metadata;
    std::vector<double> payload;

    // Value for key; throws FormatError when absent.
    const std::string& value(const std::string& key) const;
    std::size_t value_as_size(const std::string& key) const;
    double value_as_real(const std::string& key) const;
};

void write_checkpoint(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::string>>& metadata,
                      const std::vector<std::span<const double>>& blocks);

CheckpointData read_checkpoint(const std::filesystem::path& path);

}  // namespace graphnc::calib
