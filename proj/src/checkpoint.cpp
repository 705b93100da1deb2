#include "graphnc/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <fstream>

#include "text_io.hpp"

namespace graphnc::calib {

namespace {

constexpr char kMagic[4] = {'G', 'N', 'C', '1'};

void append_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t read_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

}  // namespace

const std::string& CheckpointData::value(const std::string& key) const {
    for (const auto& [k, v] : metadata) {
        if (k == key) return v;
    }
    throw FormatError("checkpoint: missing metadata key '" + key + "'");
}

std::size_t CheckpointData::value_as_size(const std::string& key) const {
    const std::string& s = value(key);
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw FormatError("checkpoint: metadata key '" + key +
                          "' is not a non-negative integer: '" + s + "'");
    }
    return v;
}

double CheckpointData::value_as_real(const std::string& key) const {
    const std::string& s = value(key);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw FormatError("checkpoint: metadata key '" + key + "' is not a number: '" +
                          s + "'");
    }
    return v;
}

void write_checkpoint(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::string>>& metadata,
                      const std::vector<std::span<const double>>& blocks) {
    std::string meta_text;
    for (const auto& [k, v] : metadata) {
        if (k.find('=') != std::string::npos || k.find('\n') != std::string::npos ||
            v.find('\n') != std::string::npos) {
            throw ContractError("checkpoint: metadata keys/values must not contain '=' "
                                "in keys or newlines");
        }
        meta_text += k;
        meta_text += '=';
        meta_text += v;
        meta_text += '\n';
    }

    std::string bytes;
    bytes.append(kMagic, sizeof(kMagic));
    append_u64_le(bytes, meta_text.size());
    bytes += meta_text;
    for (const auto block : blocks) {
        for (const double x : block) {
            append_u64_le(bytes, std::bit_cast<std::uint64_t>(x));
        }
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());

    if (bytes.size() < sizeof(kMagic) + 8 ||
        bytes.compare(0, sizeof(kMagic), kMagic, sizeof(kMagic)) != 0) {
        throw FormatError(path.string() + ": not a GNC1 checkpoint");
    }
    const std::uint64_t meta_len =
        read_u64_le(reinterpret_cast<const unsigned char*>(bytes.data()) + 4);
    const std::size_t payload_start = sizeof(kMagic) + 8 + meta_len;
    if (payload_start > bytes.size()) {
        throw FormatError(path.string() + ": truncated metadata block");
    }

    CheckpointData data;
    std::size_t pos = sizeof(kMagic) + 8;
    const std::size_t meta_end = payload_start;
    while (pos < meta_end) {
        const std::size_t eol = bytes.find('\n', pos);
        if (eol == std::string::npos || eol >= meta_end) {
            throw FormatError(path.string() + ": unterminated metadata line");
        }
        const std::string line = bytes.substr(pos, eol - pos);
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError(path.string() + ": metadata line without '=': " + line);
        }
        data.metadata.emplace_back(line.substr(0, eq), line.substr(eq + 1));
        pos = eol + 1;
    }

    const std::size_t payload_bytes = bytes.size() - payload_start;
    if (payload_bytes % 8 != 0) {
        throw FormatError(path.string() + ": payload is not a whole number of 64-bit "
                                          "values");
    }
    data.payload.resize(payload_bytes / 8);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + payload_start;
    for (auto& x : data.payload) {
        x = std::bit_cast<double>(read_u64_le(p));
        p += 8;
    }
    return data;
}

}  // namespace graphnc::calib
