#pragma once
// Trustworthy fusion of a backbone probability map with a fallback map under
// anatomical and intensity contracts, applied voxel-wise:
//
//   out = apply_intensity( apply_anatomical( (1-eps) p_ai + eps p_fb ) )
//
// plus the fail-safe conflict map 1 - sum_c p_ai(c) w_c used for incident
// detection. Wherever the backbone completely contradicts the contracts the
// output provably reduces to fallback (+) contracts, independent of eps.

#include "veritas/contracts.hpp"
#include "veritas/volume.hpp"

#include <filesystem>
#include <optional>

namespace veritas {

struct FusionConfig {
    LabelSpace space;
    double epsilon = 1e-3; // must stay strictly inside (0, 1)
    ThresholdKind phi = ThresholdKind::hard;
    std::vector<double> margins_mm; // one per class
    SubsetMask c_high;              // classes boosted by the intensity contract
    std::optional<Gmm2> gmm;        // fit per-image inside the brain mask when absent
    int background_class = 0;       // excluded from the brain mask

    void validate() const;

    // Contract config JSON:
    //   { "classes": [...], "epsilon": e, "phi": "hard"|"exp",
    //     "margins_mm": {class: eta}, "c_high": [class names],
    //     "background": name?, "gmm": {mu_low, sigma_low, mu_high,
    //     sigma_high, pi_low, pi_high}? }
    static FusionConfig from_json_file(const std::filesystem::path& path);
};

// Hard per-class masks from the fallback's argmax; these partition the grid
// by construction and generate the anatomical contracts.
std::vector<MaskVolume> fallback_class_masks(const ProbabilityVolume& p_fb);

// Union of fallback class masks excluding the background class.
MaskVolume brain_mask_from_fallback(const ProbabilityVolume& p_fb, int background_class);

AnatomicalWeights build_contracts_from_fallback(const LabelSpace& space,
                                                const ProbabilityVolume& p_fb,
                                                const std::vector<double>& margins_mm,
                                                ThresholdKind kind);

ProbabilityVolume trustworthy_fuse(const ProbabilityVolume& p_ai, const ProbabilityVolume& p_fb,
                                   const AnatomicalWeights& aw, const ScalarVolume& image,
                                   const FusionConfig& cfg);

// Per-voxel conflict mass between the backbone and the anatomical contracts,
// in [0, 1]; exactly 1 at voxels of complete contradiction.
ScalarVolume failsafe_map(const ProbabilityVolume& p_ai, const AnatomicalWeights& aw);

// Fraction of voxels (optionally restricted to a mask) with conflict >= tau.
double incident_fraction(const ScalarVolume& conflict, double tau,
                         const MaskVolume* mask = nullptr);

} // namespace veritas
