#include "veritas/fusion.hpp"

#include "veritas/parallel.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <mutex>
#include <stdexcept>

namespace veritas {

void FusionConfig::validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw std::invalid_argument("FusionConfig: epsilon must lie strictly in (0, 1)");
    if (static_cast<int>(margins_mm.size()) != space.size())
        throw std::invalid_argument("FusionConfig: one margin per class required");
    for (double eta : margins_mm)
        if (!(eta >= 0.0)) throw std::invalid_argument("FusionConfig: margins must be >= 0");
    if (c_high.empty() || c_high == space.full_set())
        throw std::invalid_argument("FusionConfig: c_high must be a non-empty proper subset");
    if (background_class < 0 || background_class >= space.size())
        throw std::invalid_argument("FusionConfig: background class out of range");
    if (gmm) gmm->validate();
}

FusionConfig FusionConfig::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open contract config: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed contract config " + path.string() + ": " + e.what());
    }

    FusionConfig cfg;
    try {
        cfg.space = LabelSpace(j.at("classes").get<std::vector<std::string>>());
        cfg.epsilon = j.value("epsilon", 1e-3);
        cfg.phi = threshold_kind_from_string(j.value("phi", std::string("hard")));

        cfg.margins_mm.assign(cfg.space.size(), 0.0);
        for (const auto& [cls, eta] : j.at("margins_mm").items())
            cfg.margins_mm[cfg.space.index_of(cls)] = eta.get<double>();

        cfg.c_high = SubsetMask::empty_set();
        for (const auto& cls : j.at("c_high")) cfg.c_high = cfg.c_high.with(cfg.space.index_of(cls.get<std::string>()));

        if (j.contains("background")) {
            cfg.background_class = cfg.space.index_of(j.at("background").get<std::string>());
        } else {
            cfg.background_class = 0;
            for (int c = 0; c < cfg.space.size(); ++c)
                if (cfg.space.name(c) == "background") cfg.background_class = c;
        }

        if (j.contains("gmm")) {
            const auto& g = j.at("gmm");
            Gmm2 gmm;
            gmm.mu_low = g.at("mu_low").get<double>();
            gmm.sigma_low = g.at("sigma_low").get<double>();
            gmm.mu_high = g.at("mu_high").get<double>();
            gmm.sigma_high = g.at("sigma_high").get<double>();
            gmm.pi_low = g.value("pi_low", 0.5);
            gmm.pi_high = g.value("pi_high", 0.5);
            cfg.gmm = gmm;
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed contract config " + path.string() + ": " + e.what());
    }
    cfg.validate();
    return cfg;
}

std::vector<MaskVolume> fallback_class_masks(const ProbabilityVolume& p_fb) {
    const LabelSetVolume hard = argmax_labels(p_fb);
    std::vector<MaskVolume> masks(p_fb.channels);
    for (int c = 0; c < p_fb.channels; ++c) {
        masks[c].meta = p_fb.meta;
        masks[c].data.assign(p_fb.meta.voxel_count(), 0);
    }
    for (std::size_t v = 0; v < hard.data.size(); ++v)
        masks[hard.data[v].sole_class()].data[v] = 1;
    return masks;
}

MaskVolume brain_mask_from_fallback(const ProbabilityVolume& p_fb, int background_class) {
    const LabelSetVolume hard = argmax_labels(p_fb);
    MaskVolume out;
    out.meta = p_fb.meta;
    out.data.resize(p_fb.meta.voxel_count());
    for (std::size_t v = 0; v < out.data.size(); ++v)
        out.data[v] = hard.data[v].contains(background_class) ? 0 : 1;
    return out;
}

AnatomicalWeights build_contracts_from_fallback(const LabelSpace& space,
                                                const ProbabilityVolume& p_fb,
                                                const std::vector<double>& margins_mm,
                                                ThresholdKind kind) {
    if (p_fb.channels != space.size())
        throw std::invalid_argument("build_contracts_from_fallback: channel/class mismatch");
    return build_anatomical(space, fallback_class_masks(p_fb), margins_mm, kind);
}

ProbabilityVolume trustworthy_fuse(const ProbabilityVolume& p_ai, const ProbabilityVolume& p_fb,
                                   const AnatomicalWeights& aw, const ScalarVolume& image,
                                   const FusionConfig& cfg) {
    cfg.validate();
    p_ai.validate();
    p_fb.validate();
    image.validate();
    if (!(p_ai.meta == p_fb.meta) || !(p_ai.meta == aw.meta) || !(p_ai.meta == image.meta))
        throw std::invalid_argument("trustworthy_fuse: grid mismatch");
    const int k = cfg.space.size();
    if (p_ai.channels != k || p_fb.channels != k || aw.space.size() != k)
        throw std::invalid_argument("trustworthy_fuse: channel/class mismatch");

    Gmm2 gmm;
    if (cfg.gmm) {
        gmm = *cfg.gmm;
    } else {
        const MaskVolume brain = brain_mask_from_fallback(p_fb, cfg.background_class);
        if (brain.empty_mask())
            throw std::invalid_argument("trustworthy_fuse: empty brain mask, cannot fit GMM");
        gmm = fit_gmm2(masked_intensities(image, brain)).model;
    }

    ProbabilityVolume out;
    out.meta = p_ai.meta;
    out.channels = k;
    out.data.resize(p_ai.data.size());
    const double eps = cfg.epsilon;
    const std::size_t n = p_ai.meta.voxel_count();

    std::mutex err_mutex;
    std::exception_ptr first_error;
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        std::vector<double> blend(k), reweighted(k);
        try {
            for (std::size_t v = begin; v < end; ++v) {
                for (int c = 0; c < k; ++c)
                    blend[c] = (1.0 - eps) * p_ai.at(v, c) + eps * p_fb.at(v, c);
                try {
                    apply_anatomical_raw(blend, aw.row(v), reweighted);
                } catch (const std::domain_error&) {
                    throw std::invalid_argument(
                        "trustworthy_fuse: fallback contradicts the contracts (config error)");
                }
                const double ratio = intensity_boost_ratio(image.data[v], gmm);
                apply_intensity_raw(reweighted, cfg.c_high, ratio,
                                    std::span<double>(out.data.data() + v * k, k));
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(err_mutex);
            if (!first_error) first_error = std::current_exception();
        }
    });
    if (first_error) std::rethrow_exception(first_error);
    return out;
}

ScalarVolume failsafe_map(const ProbabilityVolume& p_ai, const AnatomicalWeights& aw) {
    if (!(p_ai.meta == aw.meta) || p_ai.channels != aw.space.size())
        throw std::invalid_argument("failsafe_map: grid mismatch");
    ScalarVolume out;
    out.meta = p_ai.meta;
    out.data.resize(p_ai.meta.voxel_count());
    const int k = p_ai.channels;
    parallel_for(out.data.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t v = begin; v < end; ++v) {
            double compatible = 0.0;
            for (int c = 0; c < k; ++c) compatible += p_ai.at(v, c) * aw.at(v, c);
            out.data[v] = std::clamp(1.0 - compatible, 0.0, 1.0);
        }
    });
    return out;
}

double incident_fraction(const ScalarVolume& conflict, double tau, const MaskVolume* mask) {
    if (!(tau >= 0.0 && tau <= 1.0))
        throw std::invalid_argument("incident_fraction: tau outside [0, 1]");
    if (mask && !(mask->meta == conflict.meta))
        throw std::invalid_argument("incident_fraction: grid mismatch");
    std::size_t total = 0, hits = 0;
    for (std::size_t v = 0; v < conflict.data.size(); ++v) {
        if (mask && !mask->data[v]) continue;
        ++total;
        hits += (conflict.data[v] >= tau);
    }
    return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

} // namespace veritas
