#include "veritas/fallback.hpp"

#include "veritas/parallel.hpp"
#include "veritas/volume_io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace veritas {

void DisplacementField::validate() const {
    x.validate();
    y.validate();
    z.validate();
    if (!(x.meta == y.meta) || !(x.meta == z.meta))
        throw std::invalid_argument("DisplacementField: component grids differ");
}

void AtlasFusionParams::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw std::invalid_argument("AtlasFusionParams: alpha outside [0, 1]");
    if (!(gauss_sigma_mm > 0.0))
        throw std::invalid_argument("AtlasFusionParams: sigma must be positive");
    if (delta_ga_neurotypical_weeks < 0 || delta_ga_spina_bifida_weeks < 0)
        throw std::invalid_argument("AtlasFusionParams: GA windows must be >= 0");
}

int ga_weeks_from_days(int ga_days) {
    return static_cast<int>(std::floor(ga_days / 7.0 + 0.5));
}

std::vector<std::size_t> select_atlases(const std::vector<AtlasEntry>& entries, int ga_weeks,
                                        Condition condition, const AtlasFusionParams& params) {
    params.validate();
    const int window = condition == Condition::spina_bifida ? params.delta_ga_spina_bifida_weeks
                                                            : params.delta_ga_neurotypical_weeks;
    std::vector<std::size_t> selected;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].condition != condition) continue;
        if (std::abs(ga_weeks_from_days(entries[i].ga_days) - ga_weeks) <= window)
            selected.push_back(i);
    }
    if (selected.empty())
        throw std::invalid_argument("select_atlases: no atlas within the GA window");
    return selected;
}

namespace {

// Reflect with edge duplication; folds until the index lands in range.
int reflect_index(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
    }
    return i;
}

// Separable convolution along one axis with reflect padding.
void convolve_axis(std::vector<double>& grid, const GridMeta& meta, int axis,
                   const std::vector<double>& taps) {
    const int radius = static_cast<int>(taps.size() / 2);
    const int nx = meta.dims[0], ny = meta.dims[1], nz = meta.dims[2];

    int len = 0;
    std::size_t stride = 0, rows = 0;
    if (axis == 0) {
        len = nx;
        stride = 1;
        rows = static_cast<std::size_t>(ny) * nz;
    } else if (axis == 1) {
        len = ny;
        stride = nx;
        rows = static_cast<std::size_t>(nx) * nz;
    } else {
        len = nz;
        stride = static_cast<std::size_t>(nx) * ny;
        rows = static_cast<std::size_t>(nx) * ny;
    }

    parallel_for(rows, [&](std::size_t begin, std::size_t end) {
        std::vector<double> line(len), out(len);
        for (std::size_t r = begin; r < end; ++r) {
            std::size_t base = 0;
            if (axis == 0) {
                base = r * nx;
            } else if (axis == 1) {
                const std::size_t z = r / nx, x = r % nx;
                base = z * static_cast<std::size_t>(nx) * ny + x;
            } else {
                base = r;
            }
            for (int i = 0; i < len; ++i) line[i] = grid[base + i * stride];
            for (int i = 0; i < len; ++i) {
                double acc = 0.0;
                for (int t = -radius; t <= radius; ++t)
                    acc += taps[t + radius] * line[reflect_index(i + t, len)];
                out[i] = acc;
            }
            for (int i = 0; i < len; ++i) grid[base + i * stride] = out[i];
        }
    });
}

// Cubic B-spline sampled at unit (voxel) offsets over its +-2-knot support.
std::vector<double> bspline3_taps() { return {1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0}; }

std::vector<double> gaussian_taps(double sigma_mm, double spacing_mm) {
    const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma_mm / spacing_mm)));
    std::vector<double> taps(2 * radius + 1);
    double sum = 0.0;
    for (int t = -radius; t <= radius; ++t) {
        const double u = t * spacing_mm / sigma_mm;
        taps[t + radius] = std::exp(-0.5 * u * u);
        sum += taps[t + radius];
    }
    for (double& v : taps) v /= sum;
    return taps;
}

} // namespace

ScalarVolume normalize_intensities(const ScalarVolume& vol, const MaskVolume* mask) {
    vol.validate();
    if (mask && !(mask->meta == vol.meta))
        throw std::invalid_argument("normalize_intensities: grid mismatch");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t v = 0; v < vol.data.size(); ++v) {
        if (mask && !mask->data[v]) continue;
        sum += vol.data[v];
        ++count;
    }
    if (count == 0) throw std::invalid_argument("normalize_intensities: empty mask");
    const double mean = sum / static_cast<double>(count);
    double var = 0.0;
    for (std::size_t v = 0; v < vol.data.size(); ++v) {
        if (mask && !mask->data[v]) continue;
        var += (vol.data[v] - mean) * (vol.data[v] - mean);
    }
    const double sd = std::sqrt(var / static_cast<double>(count));
    const double scale = sd > 0.0 ? 1.0 / sd : 0.0; // constant volume -> all zeros

    ScalarVolume out;
    out.meta = vol.meta;
    out.data.resize(vol.data.size());
    for (std::size_t v = 0; v < vol.data.size(); ++v)
        out.data[v] = (vol.data[v] - mean) * scale;
    return out;
}

ScalarVolume local_ssd(const ScalarVolume& subject, const ScalarVolume& atlas_img,
                       const MaskVolume* mask) {
    if (!(subject.meta == atlas_img.meta)) throw std::invalid_argument("local_ssd: grid mismatch");
    const ScalarVolume a = normalize_intensities(subject, mask);
    const ScalarVolume b = normalize_intensities(atlas_img, mask);

    ScalarVolume out;
    out.meta = subject.meta;
    out.data.resize(subject.data.size());
    for (std::size_t v = 0; v < out.data.size(); ++v) {
        const double d = a.data[v] - b.data[v];
        out.data[v] = d * d;
    }
    const auto taps = bspline3_taps();
    for (int axis = 0; axis < 3; ++axis) convolve_axis(out.data, out.meta, axis, taps);
    return out;
}

ScalarVolume high_freq_disp_norm(const DisplacementField& disp, double sigma_mm) {
    disp.validate();
    if (!(sigma_mm > 0.0)) throw std::invalid_argument("high_freq_disp_norm: sigma must be > 0");
    const GridMeta meta = disp.meta();

    ScalarVolume out;
    out.meta = meta;
    out.data.assign(meta.voxel_count(), 0.0);

    const ScalarVolume* comps[3] = {&disp.x, &disp.y, &disp.z};
    for (const ScalarVolume* comp : comps) {
        std::vector<double> low = comp->data;
        for (int axis = 0; axis < 3; ++axis)
            convolve_axis(low, meta, axis, gaussian_taps(sigma_mm, meta.spacing[axis]));
        for (std::size_t v = 0; v < out.data.size(); ++v) {
            const double hf = comp->data[v] - low[v];
            out.data[v] += hf * hf;
        }
    }
    for (double& v : out.data) v = std::sqrt(v);
    return out;
}

double heat_weight(double distance) {
    if (distance < 0.0) throw std::invalid_argument("heat_weight: distance must be >= 0");
    return std::exp(-distance * distance);
}

ProbabilityVolume fuse_atlases(const std::vector<AtlasEntry>& entries,
                               const ScalarVolume& subject, const AtlasFusionParams& params,
                               const MaskVolume* mask) {
    params.validate();
    if (entries.empty()) throw std::invalid_argument("fuse_atlases: empty atlas list");
    const GridMeta meta = subject.meta;
    const int k = entries.front().probs.channels;
    for (const auto& e : entries) {
        if (!(e.image.meta == meta) || !(e.probs.meta == meta) || !(e.displacement.meta() == meta))
            throw std::invalid_argument("fuse_atlases: grid mismatch");
        if (e.probs.channels != k)
            throw std::invalid_argument("fuse_atlases: inconsistent channel counts");
    }

    const std::size_t n = meta.voxel_count();
    std::vector<std::vector<double>> weights(entries.size());
    for (std::size_t a = 0; a < entries.size(); ++a) {
        const ScalarVolume l = local_ssd(subject, entries[a].image, mask);
        const ScalarVolume f = high_freq_disp_norm(entries[a].displacement, params.gauss_sigma_mm);
        weights[a].resize(n);
        for (std::size_t v = 0; v < n; ++v) {
            const double d = params.alpha * l.data[v] + (1.0 - params.alpha) * f.data[v];
            weights[a][v] = heat_weight(d);
        }
    }

    ProbabilityVolume out;
    out.meta = meta;
    out.channels = k;
    out.data.assign(n * static_cast<std::size_t>(k), 0.0);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t v = begin; v < end; ++v) {
            double wsum = 0.0;
            for (std::size_t a = 0; a < entries.size(); ++a) wsum += weights[a][v];
            for (int c = 0; c < k; ++c) {
                double acc = 0.0;
                for (std::size_t a = 0; a < entries.size(); ++a)
                    acc += weights[a][v] * entries[a].probs.at(v, c);
                out.at(v, c) = acc / wsum; // heat weights are strictly positive
            }
        }
    });
    return out;
}

AtlasManifest load_atlas_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open atlas manifest: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed atlas manifest " + path.string() + ": " + e.what());
    }

    const auto dir = path.parent_path();
    auto resolve = [&](const std::string& p) { return dir / p; };

    AtlasManifest m;
    try {
        m.subject = read_scalar_volume(resolve(j.at("subject_image").get<std::string>()));
        if (j.contains("ga_weeks"))
            m.ga_weeks = j.at("ga_weeks").get<int>();
        else
            m.ga_weeks = ga_weeks_from_days(j.at("ga_days").get<int>());
        m.condition = condition_from_string(j.at("condition").get<std::string>());
        m.params.alpha = j.value("alpha", 0.5);
        m.params.gauss_sigma_mm = j.value("gauss_sigma_mm", 20.0);
        if (j.contains("brain_mask"))
            m.brain_mask = read_mask_volume(resolve(j.at("brain_mask").get<std::string>()));
        for (const auto& e : j.at("entries")) {
            AtlasEntry entry;
            entry.id = e.at("id").get<std::string>();
            entry.ga_days = e.at("ga_days").get<int>();
            entry.condition = condition_from_string(e.at("condition").get<std::string>());
            entry.image = read_scalar_volume(resolve(e.at("image").get<std::string>()));
            entry.probs = read_probability_volume(resolve(e.at("probs").get<std::string>()));
            const auto disp = e.at("displacement");
            if (disp.size() != 3)
                throw std::runtime_error("displacement must list the three component volumes");
            entry.displacement.x = read_scalar_volume(resolve(disp[0].get<std::string>()));
            entry.displacement.y = read_scalar_volume(resolve(disp[1].get<std::string>()));
            entry.displacement.z = read_scalar_volume(resolve(disp[2].get<std::string>()));
            m.entries.push_back(std::move(entry));
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed atlas manifest " + path.string() + ": " + e.what());
    }
    m.params.validate();
    return m;
}

} // namespace veritas
