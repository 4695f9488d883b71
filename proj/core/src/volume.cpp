#include "veritas/volume.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace veritas {

void GridMeta::validate() const {
    for (int d = 0; d < 3; ++d) {
        if (dims[d] < 1) throw std::invalid_argument("GridMeta: dims must be >= 1");
        if (!(spacing[d] > 0.0) || !std::isfinite(spacing[d]))
            throw std::invalid_argument("GridMeta: spacing must be positive and finite");
    }
}

void ScalarVolume::validate() const {
    meta.validate();
    if (data.size() != meta.voxel_count())
        throw std::invalid_argument("ScalarVolume: payload size does not match dims");
    for (double v : data)
        if (!std::isfinite(v)) throw std::invalid_argument("ScalarVolume: non-finite value");
}

std::size_t MaskVolume::foreground_count() const {
    std::size_t n = 0;
    for (auto v : data) n += (v != 0);
    return n;
}

void MaskVolume::validate() const {
    meta.validate();
    if (data.size() != meta.voxel_count())
        throw std::invalid_argument("MaskVolume: payload size does not match dims");
}

void ProbabilityVolume::validate(double tol) const {
    meta.validate();
    if (channels < 1) throw std::invalid_argument("ProbabilityVolume: channels must be >= 1");
    if (data.size() != meta.voxel_count() * static_cast<std::size_t>(channels))
        throw std::invalid_argument("ProbabilityVolume: payload size does not match dims*channels");
    const std::size_t n = meta.voxel_count();
    for (std::size_t v = 0; v < n; ++v) {
        double sum = 0.0;
        for (int c = 0; c < channels; ++c) {
            const double p = at(v, c);
            if (!std::isfinite(p) || p < 0.0)
                throw std::invalid_argument("ProbabilityVolume: negative or non-finite channel");
            sum += p;
        }
        if (std::abs(sum - 1.0) > tol)
            throw std::invalid_argument("ProbabilityVolume: channel sum off unity beyond tolerance");
    }
}

void LabelSetVolume::validate() const {
    meta.validate();
    if (data.size() != meta.voxel_count())
        throw std::invalid_argument("LabelSetVolume: payload size does not match dims");
    for (auto m : data)
        if (m.empty()) throw std::invalid_argument("LabelSetVolume: empty voxel subset");
}

LabelSetVolume argmax_labels(const ProbabilityVolume& pv) {
    pv.validate();
    LabelSetVolume out;
    out.meta = pv.meta;
    out.data.resize(pv.meta.voxel_count());
    const std::size_t n = pv.meta.voxel_count();
    for (std::size_t v = 0; v < n; ++v) {
        int best = 0;
        double best_p = pv.at(v, 0);
        for (int c = 1; c < pv.channels; ++c) {
            const double p = pv.at(v, c);
            if (p > best_p) { // strict: ties keep the lowest index
                best_p = p;
                best = c;
            }
        }
        out.data[v] = SubsetMask::singleton(best);
    }
    return out;
}

ProbabilityVolume renormalize(const ProbabilityVolume& pv) {
    ProbabilityVolume out = pv;
    const std::size_t n = pv.meta.voxel_count();
    for (std::size_t v = 0; v < n; ++v) {
        double sum = 0.0;
        for (int c = 0; c < pv.channels; ++c) sum += pv.at(v, c);
        if (!(sum > 0.0)) throw std::invalid_argument("renormalize: zero channel sum");
        for (int c = 0; c < pv.channels; ++c) out.at(v, c) = pv.at(v, c) / sum;
    }
    return out;
}

MaskVolume class_mask(const ProbabilityVolume& pv, int cls) {
    if (cls < 0 || cls >= pv.channels)
        throw std::invalid_argument("class_mask: channel out of range");
    const LabelSetVolume hard = argmax_labels(pv);
    MaskVolume out;
    out.meta = pv.meta;
    out.data.resize(pv.meta.voxel_count());
    for (std::size_t v = 0; v < out.data.size(); ++v)
        out.data[v] = hard.data[v].contains(cls) ? 1 : 0;
    return out;
}

} // namespace veritas
