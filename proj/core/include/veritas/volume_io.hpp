#pragma once
// Volume container format: a sidecar JSON header next to a raw body.
//
// Header schema:
//   {
//     "dims": [nx, ny, nz],
//     "spacing_mm": [sx, sy, sz],
//     "kind": "scalar" | "prob" | "mask" | "labelset",
//     "dtype": "f32le" | "u8" | "u32le",
//     "channels": c,
//     "body": "<file>.raw"
//   }
// The body is raw little-endian, channel-fastest then x-fastest.
// kind->dtype pairing: scalar/prob -> f32le, mask -> u8, labelset -> u32le.
// Reading then writing a file reproduces the body bytes exactly.

#include "veritas/volume.hpp"

#include <filesystem>
#include <variant>

namespace veritas {

using AnyVolume = std::variant<ScalarVolume, ProbabilityVolume, MaskVolume, LabelSetVolume>;

AnyVolume read_volume(const std::filesystem::path& header_path);

// Type-checked readers; throw if the header declares a different kind.
ScalarVolume read_scalar_volume(const std::filesystem::path& header_path);
ProbabilityVolume read_probability_volume(const std::filesystem::path& header_path);
MaskVolume read_mask_volume(const std::filesystem::path& header_path);
LabelSetVolume read_labelset_volume(const std::filesystem::path& header_path);

// Writers place the body at header_path with extension swapped to ".raw".
void write_volume(const ScalarVolume& vol, const std::filesystem::path& header_path);
void write_volume(const ProbabilityVolume& vol, const std::filesystem::path& header_path);
void write_volume(const MaskVolume& vol, const std::filesystem::path& header_path);
void write_volume(const LabelSetVolume& vol, const std::filesystem::path& header_path);

} // namespace veritas
