#include "veritas/volume_io.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "volume_io assumes a little-endian host");

namespace veritas {
namespace {

using nlohmann::json;

std::vector<char> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open body file: " + path.string());
    in.seekg(0, std::ios::end);
    const auto size = in.tellg();
    in.seekg(0, std::ios::beg);
    std::vector<char> bytes(static_cast<std::size_t>(size));
    in.read(bytes.data(), size);
    if (!in) throw std::runtime_error("short read on body file: " + path.string());
    return bytes;
}

void write_bytes(const std::filesystem::path& path, const char* data, std::size_t size) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open body file for writing: " + path.string());
    out.write(data, static_cast<std::streamsize>(size));
    if (!out) throw std::runtime_error("short write on body file: " + path.string());
}

struct Header {
    GridMeta meta;
    std::string kind;
    std::string dtype;
    int channels = 1;
    std::filesystem::path body;
};

Header parse_header(const std::filesystem::path& header_path) {
    std::ifstream in(header_path);
    if (!in) throw std::runtime_error("cannot open volume header: " + header_path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed volume header " + header_path.string() + ": " + e.what());
    }
    Header h;
    try {
        const auto dims = j.at("dims");
        const auto spacing = j.at("spacing_mm");
        if (dims.size() != 3 || spacing.size() != 3)
            throw std::runtime_error("dims/spacing_mm must have 3 entries");
        for (int d = 0; d < 3; ++d) {
            h.meta.dims[d] = dims[d].get<int>();
            h.meta.spacing[d] = spacing[d].get<double>();
        }
        h.kind = j.at("kind").get<std::string>();
        h.dtype = j.at("dtype").get<std::string>();
        h.channels = j.value("channels", 1);
        h.body = header_path.parent_path() / j.at("body").get<std::string>();
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed volume header " + header_path.string() + ": " + e.what());
    }
    h.meta.validate();
    if (h.channels < 1) throw std::runtime_error("malformed volume header: channels < 1");
    return h;
}

void write_header(const std::filesystem::path& header_path, const GridMeta& meta,
                  const std::string& kind, const std::string& dtype, int channels,
                  const std::string& body_name) {
    json j;
    j["dims"] = meta.dims;
    j["spacing_mm"] = meta.spacing;
    j["kind"] = kind;
    j["dtype"] = dtype;
    j["channels"] = channels;
    j["body"] = body_name;
    std::ofstream out(header_path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open header for writing: " + header_path.string());
    out << j.dump(2) << '\n';
}

std::filesystem::path body_path_for(const std::filesystem::path& header_path) {
    std::filesystem::path p = header_path;
    p.replace_extension(".raw");
    return p;
}

std::vector<double> decode_f32(const std::vector<char>& bytes, std::size_t expected) {
    if (bytes.size() != expected * sizeof(float))
        throw std::runtime_error("volume body size does not match header dims");
    std::vector<double> out(expected);
    const float* f = reinterpret_cast<const float*>(bytes.data());
    for (std::size_t i = 0; i < expected; ++i) {
        if (std::isnan(f[i])) throw std::runtime_error("volume body contains NaN");
        out[i] = static_cast<double>(f[i]);
    }
    return out;
}

std::vector<char> encode_f32(const std::vector<double>& values) {
    std::vector<char> bytes(values.size() * sizeof(float));
    float* f = reinterpret_cast<float*>(bytes.data());
    for (std::size_t i = 0; i < values.size(); ++i) f[i] = static_cast<float>(values[i]);
    return bytes;
}

} // namespace

AnyVolume read_volume(const std::filesystem::path& header_path) {
    const Header h = parse_header(header_path);
    const std::vector<char> bytes = read_bytes(h.body);
    const std::size_t n = h.meta.voxel_count();

    if (h.kind == "scalar") {
        if (h.dtype != "f32le") throw std::runtime_error("scalar volume requires dtype f32le");
        if (h.channels != 1) throw std::runtime_error("scalar volume requires channels=1");
        ScalarVolume v{h.meta, decode_f32(bytes, n)};
        v.validate();
        return v;
    }
    if (h.kind == "prob") {
        if (h.dtype != "f32le") throw std::runtime_error("prob volume requires dtype f32le");
        ProbabilityVolume v{h.meta, h.channels, decode_f32(bytes, n * h.channels)};
        v.validate();
        return v;
    }
    if (h.kind == "mask") {
        if (h.dtype != "u8") throw std::runtime_error("mask volume requires dtype u8");
        if (bytes.size() != n) throw std::runtime_error("volume body size does not match header dims");
        MaskVolume v;
        v.meta = h.meta;
        v.data.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto b = static_cast<std::uint8_t>(bytes[i]);
            if (b > 1) throw std::runtime_error("mask volume body must be 0/1");
            v.data[i] = b;
        }
        v.validate();
        return v;
    }
    if (h.kind == "labelset") {
        if (h.dtype != "u32le") throw std::runtime_error("labelset volume requires dtype u32le");
        if (bytes.size() != n * sizeof(std::uint32_t))
            throw std::runtime_error("volume body size does not match header dims");
        LabelSetVolume v;
        v.meta = h.meta;
        v.data.resize(n);
        const std::uint32_t* u = reinterpret_cast<const std::uint32_t*>(bytes.data());
        for (std::size_t i = 0; i < n; ++i) v.data[i] = SubsetMask(u[i]);
        v.validate();
        return v;
    }
    throw std::runtime_error("unknown volume kind '" + h.kind + "'");
}

ScalarVolume read_scalar_volume(const std::filesystem::path& p) {
    auto v = read_volume(p);
    if (auto* s = std::get_if<ScalarVolume>(&v)) return std::move(*s);
    throw std::runtime_error(p.string() + " is not a scalar volume");
}

ProbabilityVolume read_probability_volume(const std::filesystem::path& p) {
    auto v = read_volume(p);
    if (auto* s = std::get_if<ProbabilityVolume>(&v)) return std::move(*s);
    throw std::runtime_error(p.string() + " is not a probability volume");
}

MaskVolume read_mask_volume(const std::filesystem::path& p) {
    auto v = read_volume(p);
    if (auto* s = std::get_if<MaskVolume>(&v)) return std::move(*s);
    throw std::runtime_error(p.string() + " is not a mask volume");
}

LabelSetVolume read_labelset_volume(const std::filesystem::path& p) {
    auto v = read_volume(p);
    if (auto* s = std::get_if<LabelSetVolume>(&v)) return std::move(*s);
    throw std::runtime_error(p.string() + " is not a labelset volume");
}

void write_volume(const ScalarVolume& vol, const std::filesystem::path& header_path) {
    vol.validate();
    const auto body = body_path_for(header_path);
    const auto bytes = encode_f32(vol.data);
    write_bytes(body, bytes.data(), bytes.size());
    write_header(header_path, vol.meta, "scalar", "f32le", 1, body.filename().string());
}

void write_volume(const ProbabilityVolume& vol, const std::filesystem::path& header_path) {
    vol.validate();
    const auto body = body_path_for(header_path);
    const auto bytes = encode_f32(vol.data);
    write_bytes(body, bytes.data(), bytes.size());
    write_header(header_path, vol.meta, "prob", "f32le", vol.channels, body.filename().string());
}

void write_volume(const MaskVolume& vol, const std::filesystem::path& header_path) {
    vol.validate();
    const auto body = body_path_for(header_path);
    std::vector<char> bytes(vol.data.size());
    for (std::size_t i = 0; i < vol.data.size(); ++i) bytes[i] = vol.data[i] ? 1 : 0;
    write_bytes(body, bytes.data(), bytes.size());
    write_header(header_path, vol.meta, "mask", "u8", 1, body.filename().string());
}

void write_volume(const LabelSetVolume& vol, const std::filesystem::path& header_path) {
    vol.validate();
    const auto body = body_path_for(header_path);
    std::vector<char> bytes(vol.data.size() * sizeof(std::uint32_t));
    std::uint32_t* u = reinterpret_cast<std::uint32_t*>(bytes.data());
    for (std::size_t i = 0; i < vol.data.size(); ++i) u[i] = vol.data[i].bits();
    write_bytes(body, bytes.data(), bytes.size());
    write_header(header_path, vol.meta, "labelset", "u32le", 1, body.filename().string());
}

} // namespace veritas
