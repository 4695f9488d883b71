#pragma once
// Heat-kernel fusion of pre-registered atlas probability maps into the
// fallback probability volume. Registration itself is out of scope: every
// atlas entry arrives already warped onto the subject grid.
//
// Per atlas k the morphological-similarity surrogate is
//   D_k = alpha * L_k + (1 - alpha) * F_k
// with L_k the B-spline-smoothed local SSD of normalized intensities and
// F_k the per-voxel norm of the displacement field after removing its low
// spatial frequencies; the fusion weight is w_k = exp(-D_k^2).

#include "veritas/condition.hpp"
#include "veritas/volume.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace veritas {

struct DisplacementField {
    ScalarVolume x, y, z; // mm components on the subject grid

    const GridMeta& meta() const { return x.meta; }
    void validate() const;
};

struct AtlasEntry {
    std::string id;
    int ga_days = 0;
    Condition condition = Condition::neurotypical;
    ScalarVolume image;          // warped atlas intensities
    ProbabilityVolume probs;     // warped atlas probabilities
    DisplacementField displacement; // warped field, mm
};

struct AtlasFusionParams {
    double alpha = 0.5;
    double gauss_sigma_mm = 20.0;
    int delta_ga_neurotypical_weeks = 1;
    int delta_ga_spina_bifida_weeks = 3;

    void validate() const;
};

// Gestational age in completed weeks, rounded half-up from days.
int ga_weeks_from_days(int ga_days);

// Atlas entries of the matching condition whose GA (rounded to weeks) falls
// within [ga_weeks - dGA, ga_weeks + dGA]. Throws when the window is empty.
std::vector<std::size_t> select_atlases(const std::vector<AtlasEntry>& entries, int ga_weeks,
                                        Condition condition, const AtlasFusionParams& params);

// Linear rescale to zero mean / unit variance over the mask (whole volume
// when mask is null). Constant volumes map to all zeros.
ScalarVolume normalize_intensities(const ScalarVolume& vol, const MaskVolume* mask = nullptr);

// B^3-smoothed squared difference of independently normalized intensities.
// The cubic B-spline kernel is sampled at voxel offsets (taps 1/6, 2/3, 1/6
// per axis, the kernel's exact +-2-knot support) with reflect padding.
ScalarVolume local_ssd(const ScalarVolume& subject, const ScalarVolume& atlas_img,
                       const MaskVolume* mask = nullptr);

// || phi - G_sigma * phi ||_2 per voxel, Gaussian truncated at 4 sigma,
// reflect padding; preserves constant fields.
ScalarVolume high_freq_disp_norm(const DisplacementField& disp, double sigma_mm);

// Heat kernel weight for a similarity distance D >= 0.
double heat_weight(double distance);

// Voxel-wise convex combination of the selected atlas probability maps with
// heat-kernel weights. Throws on an empty atlas list.
ProbabilityVolume fuse_atlases(const std::vector<AtlasEntry>& entries,
                               const ScalarVolume& subject, const AtlasFusionParams& params,
                               const MaskVolume* mask = nullptr);

// Manifest JSON:
//   { "subject_image": path, "ga_days": d | "ga_weeks": w, "condition": s,
//     "alpha"?, "gauss_sigma_mm"?, "brain_mask"?: path,
//     "entries": [ {"id", "ga_days", "condition", "image", "probs",
//                   "displacement": [dx, dy, dz]} ] }
// Volume paths are resolved relative to the manifest location.
struct AtlasManifest {
    ScalarVolume subject;
    int ga_weeks = 0;
    Condition condition = Condition::neurotypical;
    AtlasFusionParams params;
    std::vector<AtlasEntry> entries;
    std::optional<MaskVolume> brain_mask;
};

AtlasManifest load_atlas_manifest(const std::filesystem::path& path);

} // namespace veritas
