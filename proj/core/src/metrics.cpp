#include "veritas/metrics.hpp"

#include "veritas/edt.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace veritas {

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("percentile: empty input");
    if (q < 0.0 || q > 100.0) throw std::invalid_argument("percentile: q outside [0, 100]");
    std::sort(values.begin(), values.end());
    const double rank = q / 100.0 * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(rank);
    if (lo + 1 >= values.size()) return values.back();
    const double frac = rank - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

MaskVolume surface_voxels(const MaskVolume& mask) {
    mask.validate();
    const auto& m = mask.meta;
    MaskVolume out;
    out.meta = m;
    out.data.assign(m.voxel_count(), 0);
    const int nx = m.dims[0], ny = m.dims[1], nz = m.dims[2];
    auto background = [&](int x, int y, int z) {
        if (x < 0 || y < 0 || z < 0 || x >= nx || y >= ny || z >= nz) return true;
        return !mask.at(x, y, z);
    };
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                if (!mask.at(x, y, z)) continue;
                const bool surf = background(x - 1, y, z) || background(x + 1, y, z) ||
                                  background(x, y - 1, z) || background(x, y + 1, z) ||
                                  background(x, y, z - 1) || background(x, y, z + 1);
                if (surf) out.data[m.index(x, y, z)] = 1;
            }
    return out;
}

double dice(const MaskVolume& a, const MaskVolume& b) {
    if (!(a.meta == b.meta)) throw std::invalid_argument("dice: grid mismatch");
    std::size_t inter = 0, total = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const bool va = a.data[i] != 0, vb = b.data[i] != 0;
        inter += (va && vb);
        total += va;
        total += vb;
    }
    if (total == 0) return 1.0; // both empty
    return 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

namespace {

// Nearest surface-to-surface distances from every surface voxel of `from`,
// computed off the exact distance transform of `to`'s surface.
std::vector<double> directed_surface_distances(const MaskVolume& from, const MaskVolume& to) {
    const MaskVolume surf_from = surface_voxels(from);
    const MaskVolume surf_to = surface_voxels(to);
    const ScalarVolume d = distance_transform(surf_to);
    std::vector<double> out;
    out.reserve(surf_from.foreground_count());
    for (std::size_t i = 0; i < surf_from.data.size(); ++i)
        if (surf_from.data[i]) out.push_back(d.data[i]);
    return out;
}

} // namespace

double hd95(const MaskVolume& a, const MaskVolume& b) {
    if (!(a.meta == b.meta)) throw std::invalid_argument("hd95: grid mismatch");
    if (a.empty_mask() || b.empty_mask()) throw std::invalid_argument("hd95: empty mask");
    const double d_ab = percentile(directed_surface_distances(a, b), 95.0);
    const double d_ba = percentile(directed_surface_distances(b, a), 95.0);
    return std::max(d_ab, d_ba);
}

double hd95_fn(const MaskVolume& pred, const MaskVolume& gt) {
    if (!(pred.meta == gt.meta)) throw std::invalid_argument("hd95_fn: grid mismatch");
    if (pred.empty_mask()) throw std::invalid_argument("hd95_fn: empty prediction mask");
    MaskVolume un;
    un.meta = pred.meta;
    un.data.resize(pred.data.size());
    for (std::size_t i = 0; i < un.data.size(); ++i)
        un.data[i] = (pred.data[i] || gt.data[i]) ? 1 : 0;
    return hd95(pred, un);
}

double tune_margin(const std::vector<std::pair<MaskVolume, MaskVolume>>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("tune_margin: no pairs");
    std::vector<double> values;
    values.reserve(pairs.size());
    for (const auto& [pred, gt] : pairs) values.push_back(hd95_fn(pred, gt));
    return percentile(std::move(values), 95.0);
}

void MarginTable::set(const std::string& cls, Condition cond, double eta_mm) {
    if (!(eta_mm >= 0.0)) throw std::invalid_argument("MarginTable: eta must be >= 0");
    eta_[{cls, cond}] = eta_mm;
}

double MarginTable::get(const std::string& cls, Condition cond) const {
    auto it = eta_.find({cls, cond});
    if (it == eta_.end())
        throw std::invalid_argument("MarginTable: no entry for class '" + cls + "', condition " +
                                    to_string(cond));
    return it->second;
}

bool MarginTable::has(const std::string& cls, Condition cond) const {
    return eta_.count({cls, cond}) != 0;
}

double margin_for_other_pathologies(const MarginTable& table, const std::string& cls) {
    return std::max(table.get(cls, Condition::neurotypical),
                    table.get(cls, Condition::spina_bifida));
}

} // namespace veritas
