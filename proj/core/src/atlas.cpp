#include "veritas/atlas.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace veritas {

double temporal_weight(double ga_days, double ga_target_days, double sigma_days) {
    if (!(sigma_days > 0.0)) throw std::invalid_argument("temporal_weight: sigma must be > 0");
    const double z = (ga_days - ga_target_days) / sigma_days;
    return std::exp(-0.5 * z * z) / (std::sqrt(2.0 * M_PI) * sigma_days);
}

double temporal_weight_truncated(double ga_days, double ga_target_days, double sigma_days) {
    if (std::abs(ga_days - ga_target_days) > 3.0 * sigma_days) return 0.0;
    return temporal_weight(ga_days, ga_target_days, sigma_days);
}

ScalarVolume mirror(const ScalarVolume& vol, int flip_axis) {
    if (flip_axis < 0 || flip_axis > 2) throw std::invalid_argument("mirror: axis out of range");
    const auto& m = vol.meta;
    ScalarVolume out;
    out.meta = m;
    out.data.resize(vol.data.size());
    for (int z = 0; z < m.dims[2]; ++z)
        for (int y = 0; y < m.dims[1]; ++y)
            for (int x = 0; x < m.dims[0]; ++x) {
                int sx = x, sy = y, sz = z;
                if (flip_axis == 0) sx = m.dims[0] - 1 - x;
                if (flip_axis == 1) sy = m.dims[1] - 1 - y;
                if (flip_axis == 2) sz = m.dims[2] - 1 - z;
                out.at(x, y, z) = vol.at(sx, sy, sz);
            }
    return out;
}

ScalarVolume rescale_intensities(const ScalarVolume& vol, double target_mean, double target_std,
                                 const MaskVolume* mask) {
    vol.validate();
    if (mask && !(mask->meta == vol.meta))
        throw std::invalid_argument("rescale_intensities: grid mismatch");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t v = 0; v < vol.data.size(); ++v) {
        if (mask && !mask->data[v]) continue;
        sum += vol.data[v];
        ++count;
    }
    if (count == 0) throw std::invalid_argument("rescale_intensities: empty mask");
    const double mean = sum / static_cast<double>(count);
    double var = 0.0;
    for (std::size_t v = 0; v < vol.data.size(); ++v) {
        if (mask && !mask->data[v]) continue;
        var += (vol.data[v] - mean) * (vol.data[v] - mean);
    }
    const double sd = std::sqrt(var / static_cast<double>(count));
    if (!(sd > 0.0)) throw std::invalid_argument("rescale_intensities: constant intensities");

    ScalarVolume out;
    out.meta = vol.meta;
    out.data.resize(vol.data.size());
    const double gain = target_std / sd;
    for (std::size_t v = 0; v < vol.data.size(); ++v)
        out.data[v] = (vol.data[v] - mean) * gain + target_mean;
    return out;
}

ScalarVolume weighted_average(const std::vector<ScalarVolume>& volumes,
                              const std::vector<double>& ga_days, double ga_target_days,
                              int flip_axis, double sigma_days, const MaskVolume* mask) {
    if (volumes.empty()) throw std::invalid_argument("weighted_average: no volumes");
    if (volumes.size() != ga_days.size())
        throw std::invalid_argument("weighted_average: one GA per volume required");
    const GridMeta meta = volumes.front().meta;
    for (const auto& v : volumes)
        if (!(v.meta == meta)) throw std::invalid_argument("weighted_average: grid mismatch");

    double wsum = 0.0;
    std::vector<double> w(volumes.size());
    for (std::size_t i = 0; i < volumes.size(); ++i) {
        w[i] = temporal_weight(ga_days[i], ga_target_days, sigma_days);
        wsum += w[i];
    }
    if (!(wsum > 0.0)) throw std::invalid_argument("weighted_average: all weights are zero");

    ScalarVolume out;
    out.meta = meta;
    out.data.assign(meta.voxel_count(), 0.0);
    for (std::size_t i = 0; i < volumes.size(); ++i) {
        const ScalarVolume scaled = rescale_intensities(volumes[i], 2000.0, 500.0, mask);
        const ScalarVolume flipped = mirror(scaled, flip_axis);
        for (std::size_t v = 0; v < out.data.size(); ++v)
            out.data[v] += w[i] * (scaled.data[v] + flipped.data[v]);
    }
    const double norm = 2.0 * wsum;
    for (double& v : out.data) v /= norm;
    return out;
}

// ---- weighted generalized Procrustes ----

namespace {

using Vec3 = std::array<double, 3>;

double sq_norm(const Vec3& v) { return v[0] * v[0] + v[1] * v[1] + v[2] * v[2]; }

double objective_value(const std::vector<LandmarkConfig>& configs,
                       const std::vector<std::vector<double>>& w,
                       const std::vector<SampleTransform>& transforms,
                       const std::vector<Vec3>& consensus) {
    double f = 0.0;
    for (std::size_t i = 0; i < configs.size(); ++i)
        for (std::size_t k = 0; k < consensus.size(); ++k) {
            if (w[i][k] == 0.0) continue;
            const Vec3 y = transforms[i].apply(configs[i].points[k]);
            const Vec3 r{y[0] - consensus[k][0], y[1] - consensus[k][1], y[2] - consensus[k][2]};
            f += w[i][k] * sq_norm(r);
        }
    return 0.5 * f;
}

Vec3 mean_of(const std::vector<Vec3>& pts) {
    Vec3 m{0, 0, 0};
    for (const auto& p : pts)
        for (int d = 0; d < 3; ++d) m[d] += p[d];
    for (int d = 0; d < 3; ++d) m[d] /= static_cast<double>(pts.size());
    return m;
}

double spread_of(const std::vector<Vec3>& pts, const Vec3& center) {
    double s = 0.0;
    for (const auto& p : pts) {
        const Vec3 r{p[0] - center[0], p[1] - center[1], p[2] - center[2]};
        s += sq_norm(r);
    }
    return s / static_cast<double>(pts.size());
}

// Pins the barycenter to b0 and the mean squared radius to s0.
std::vector<Vec3> project_constraints(const std::vector<Vec3>& g, const Vec3& b0, double s0) {
    const Vec3 mean = mean_of(g);
    const double spread = spread_of(g, mean);
    if (!(spread > 0.0)) return g; // collapsed consensus, leave untouched
    const double lambda = std::sqrt(s0 / spread);
    std::vector<Vec3> out(g.size());
    for (std::size_t k = 0; k < g.size(); ++k)
        for (int d = 0; d < 3; ++d) out[k][d] = b0[d] + lambda * (g[k][d] - mean[d]);
    return out;
}

} // namespace

ProcrustesSolution procrustes_solve(const std::vector<LandmarkConfig>& configs,
                                    double ga_target_days, double sigma_days) {
    constexpr int kMaxIters = 500;
    constexpr double kRelTol = 1e-10;

    const std::size_t n = configs.size();
    if (n < 2) throw std::invalid_argument("procrustes_solve: need at least 2 samples");
    const std::size_t num_landmarks = configs.front().points.size();
    if (num_landmarks == 0) throw std::invalid_argument("procrustes_solve: no landmarks");
    for (const auto& cfg : configs) {
        if (cfg.points.size() != num_landmarks || cfg.present.size() != num_landmarks)
            throw std::invalid_argument("procrustes_solve: inconsistent landmark counts");
        for (std::size_t k = 0; k < num_landmarks; ++k)
            if (cfg.present[k])
                for (int d = 0; d < 3; ++d)
                    if (!std::isfinite(cfg.points[k][d]))
                        throw std::invalid_argument("procrustes_solve: non-finite landmark");
    }

    // Per-sample per-landmark weights; zero marks a missing landmark.
    std::vector<std::vector<double>> w(n, std::vector<double>(num_landmarks, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        const double wt = temporal_weight_truncated(configs[i].ga_days, ga_target_days, sigma_days);
        for (std::size_t k = 0; k < num_landmarks; ++k)
            if (configs[i].present[k]) w[i][k] = wt;
    }

    // Constraint targets from the weighted per-landmark means of the data.
    std::vector<Vec3> xbar(num_landmarks, Vec3{0, 0, 0});
    for (std::size_t k = 0; k < num_landmarks; ++k) {
        double wk = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (w[i][k] == 0.0) continue;
            wk += w[i][k];
            for (int d = 0; d < 3; ++d) xbar[k][d] += w[i][k] * configs[i].points[k][d];
        }
        if (!(wk > 0.0))
            throw std::invalid_argument("procrustes_solve: landmark " + std::to_string(k) +
                                        " absent from every weighted sample");
        for (int d = 0; d < 3; ++d) xbar[k][d] /= wk;
    }
    const Vec3 b0 = mean_of(xbar);
    const double s0 = spread_of(xbar, b0);
    if (!(s0 > 0.0))
        throw std::invalid_argument("procrustes_solve: degenerate landmarks (all coincident)");

    // Initialization: identity scalings, barycenters moved onto b0.
    std::vector<SampleTransform> transforms(n);
    for (std::size_t i = 0; i < n; ++i) {
        double wsum = 0.0;
        Vec3 bi{0, 0, 0};
        for (std::size_t k = 0; k < num_landmarks; ++k) {
            if (w[i][k] == 0.0) continue;
            wsum += w[i][k];
            for (int d = 0; d < 3; ++d) bi[d] += w[i][k] * configs[i].points[k][d];
        }
        if (wsum > 0.0)
            for (int d = 0; d < 3; ++d) transforms[i].translation[d] = b0[d] - bi[d] / wsum;
    }
    std::vector<Vec3> consensus = project_constraints(xbar, b0, s0);

    ProcrustesSolution sol;
    double f_prev = objective_value(configs, w, transforms, consensus);
    auto record_residuals = [&](const std::vector<Vec3>& g) {
        const Vec3 mean = mean_of(g);
        const Vec3 db{mean[0] - b0[0], mean[1] - b0[1], mean[2] - b0[2]};
        sol.barycenter_residual_history.push_back(std::sqrt(sq_norm(db)));
        sol.size_residual_history.push_back(std::abs(spread_of(g, mean) - s0));
    };

    for (int iter = 0; iter < kMaxIters; ++iter) {
        // (1) per-sample weighted least squares, separable per coordinate
        for (std::size_t i = 0; i < n; ++i) {
            double wsum = 0.0;
            for (std::size_t k = 0; k < num_landmarks; ++k) wsum += w[i][k];
            if (!(wsum > 0.0)) continue;
            for (int d = 0; d < 3; ++d) {
                double mx = 0.0, mg = 0.0;
                for (std::size_t k = 0; k < num_landmarks; ++k) {
                    if (w[i][k] == 0.0) continue;
                    mx += w[i][k] * configs[i].points[k][d];
                    mg += w[i][k] * consensus[k][d];
                }
                mx /= wsum;
                mg /= wsum;
                double cov = 0.0, var = 0.0;
                for (std::size_t k = 0; k < num_landmarks; ++k) {
                    if (w[i][k] == 0.0) continue;
                    const double dx = configs[i].points[k][d] - mx;
                    cov += w[i][k] * dx * (consensus[k][d] - mg);
                    var += w[i][k] * dx * dx;
                }
                const double s = var > 0.0 ? cov / var : 1.0;
                transforms[i].scale[d] = s;
                transforms[i].translation[d] = mg - s * mx;
            }
        }

        // (2) consensus = weighted mean of the transformed landmarks
        std::vector<Vec3> ghat(num_landmarks, Vec3{0, 0, 0});
        for (std::size_t k = 0; k < num_landmarks; ++k) {
            double wk = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (w[i][k] == 0.0) continue;
                const Vec3 y = transforms[i].apply(configs[i].points[k]);
                wk += w[i][k];
                for (int d = 0; d < 3; ++d) ghat[k][d] += w[i][k] * y[d];
            }
            for (int d = 0; d < 3; ++d) ghat[k][d] /= wk;
        }

        // (3) re-project onto the barycenter/size constraints; keep the old
        // consensus if projection would increase the objective
        const std::vector<Vec3> candidate = project_constraints(ghat, b0, s0);
        const double f_candidate = objective_value(configs, w, transforms, candidate);
        const double f_keep = objective_value(configs, w, transforms, consensus);
        double f_end = f_keep;
        if (f_candidate <= f_keep) {
            consensus = candidate;
            f_end = f_candidate;
        }

        sol.objective_history.push_back(f_end);
        record_residuals(consensus);
        sol.iterations = iter + 1;
        const double decrease = f_prev - f_end;
        f_prev = f_end;
        if (decrease <= kRelTol * std::max(f_prev, 1e-300)) break;
    }

    sol.transforms = std::move(transforms);
    sol.consensus = std::move(consensus);
    sol.objective = f_prev;

    const Vec3 mean = mean_of(sol.consensus);
    const Vec3 db{mean[0] - b0[0], mean[1] - b0[1], mean[2] - b0[2]};
    sol.barycenter_residual = std::sqrt(sq_norm(db));
    sol.size_residual = std::abs(spread_of(sol.consensus, mean) - s0);
    return sol;
}

std::vector<LandmarkConfig> read_landmarks_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open landmark CSV: " + path.string());

    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("landmark CSV is empty: " + path.string());

    struct Row {
        std::string sample_id;
        double ga_days;
        int landmark_id;
        Vec3 point;
        bool present;
    };
    std::vector<Row> rows;
    int max_landmark = -1;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 7)
            throw std::runtime_error("landmark CSV line " + std::to_string(line_no) +
                                     ": expected 7 fields");
        Row r;
        r.sample_id = fields[0];
        r.ga_days = std::stod(fields[1]);
        r.landmark_id = std::stoi(fields[2]);
        r.point = {std::stod(fields[3]), std::stod(fields[4]), std::stod(fields[5])};
        r.present = fields[6] == "1" || fields[6] == "true";
        if (r.landmark_id < 0)
            throw std::runtime_error("landmark CSV line " + std::to_string(line_no) +
                                     ": negative landmark_id");
        max_landmark = std::max(max_landmark, r.landmark_id);
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw std::runtime_error("landmark CSV has no data rows");

    std::vector<LandmarkConfig> configs;
    std::map<std::string, std::size_t> index;
    const std::size_t num_landmarks = static_cast<std::size_t>(max_landmark) + 1;
    for (const auto& r : rows) {
        auto [it, inserted] = index.try_emplace(r.sample_id, configs.size());
        if (inserted) {
            LandmarkConfig cfg;
            cfg.sample_id = r.sample_id;
            cfg.ga_days = r.ga_days;
            cfg.points.assign(num_landmarks, Vec3{0, 0, 0});
            cfg.present.assign(num_landmarks, false);
            configs.push_back(std::move(cfg));
        }
        auto& cfg = configs[it->second];
        cfg.points[r.landmark_id] = r.point;
        cfg.present[r.landmark_id] = r.present;
    }
    return configs;
}

} // namespace veritas
