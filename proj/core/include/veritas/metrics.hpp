#pragma once
// Segmentation metrics and margin tuning.
//
// Conventions (used consistently across the project):
//  * percentiles interpolate linearly between closest ranks,
//    rank = q/100 * (n-1) over the sorted values;
//  * a surface voxel is a foreground voxel with at least one 6-connected
//    background neighbor, counting out-of-grid as background;
//  * dice(empty, empty) = 1; hd95 on an empty mask is an error.

#include "veritas/condition.hpp"
#include "veritas/volume.hpp"

#include <map>
#include <utility>
#include <vector>

namespace veritas {

// q in [0, 100]; throws on empty input.
double percentile(std::vector<double> values, double q);

// Binary mask of surface voxels.
MaskVolume surface_voxels(const MaskVolume& mask);

// 2|A^B| / (|A|+|B|); 1 when both masks are empty.
double dice(const MaskVolume& a, const MaskVolume& b);

// Max of the two directed 95th-percentile surface distances, in mm.
// Percentiles are taken per direction, then maxed.
double hd95(const MaskVolume& a, const MaskVolume& b);

// False-negative-only margin distance: hd95(pred, pred | gt).
// Zero whenever pred covers gt.
double hd95_fn(const MaskVolume& pred, const MaskVolume& gt);

// 95th percentile of hd95_fn over prediction/ground-truth pairs.
double tune_margin(const std::vector<std::pair<MaskVolume, MaskVolume>>& pairs);

// Margins in mm per (class, condition); eta >= 0.
class MarginTable {
public:
    void set(const std::string& cls, Condition cond, double eta_mm);
    double get(const std::string& cls, Condition cond) const; // throws if absent
    bool has(const std::string& cls, Condition cond) const;
    const std::map<std::pair<std::string, Condition>, double>& entries() const { return eta_; }

private:
    std::map<std::pair<std::string, Condition>, double> eta_;
};

// Margin for conditions other than the two tabulated ones:
// max(eta_neurotypical, eta_spina_bifida). Throws if either is missing.
double margin_for_other_pathologies(const MarginTable& table, const std::string& cls);

} // namespace veritas
