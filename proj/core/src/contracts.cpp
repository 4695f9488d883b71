#include "veritas/contracts.hpp"

#include "veritas/edt.hpp"
#include "veritas/errors.hpp"
#include "veritas/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace veritas {

ThresholdKind threshold_kind_from_string(const std::string& s) {
    if (s == "hard") return ThresholdKind::hard;
    if (s == "exp" || s == "exponential") return ThresholdKind::exponential;
    throw std::invalid_argument("unknown thresholding function '" + s + "'");
}

std::string to_string(ThresholdKind k) {
    return k == ThresholdKind::hard ? "hard" : "exp";
}

double ThresholdingFn::operator()(double d_mm) const {
    if (d_mm < 0.0) throw std::invalid_argument("thresholding function: negative distance");
    if (kind == ThresholdKind::hard) {
        if (eta_mm < 0.0) throw std::invalid_argument("hard margin: eta must be >= 0");
        return d_mm <= eta_mm ? 1.0 : 0.0;
    }
    if (!(eta_mm > 0.0)) throw std::invalid_argument("exponential margin: eta must be > 0");
    return std::exp(-d_mm / eta_mm);
}

double anatomical_weight(double d_mm, const ThresholdingFn& phi) { return phi(d_mm); }

ScalarVolume AnatomicalWeights::class_volume(int cls) const {
    ScalarVolume out;
    out.meta = meta;
    out.data.resize(meta.voxel_count());
    for (std::size_t v = 0; v < out.data.size(); ++v) out.data[v] = at(v, cls);
    return out;
}

void AnatomicalWeights::validate() const {
    const int k = space.size();
    if (w.size() != meta.voxel_count() * static_cast<std::size_t>(k))
        throw std::invalid_argument("AnatomicalWeights: size mismatch");
    const std::size_t n = meta.voxel_count();
    for (std::size_t v = 0; v < n; ++v) {
        bool anchored = false;
        for (int c = 0; c < k; ++c) {
            const double wc = at(v, c);
            if (!(wc >= 0.0 && wc <= 1.0))
                throw std::invalid_argument("AnatomicalWeights: weight outside [0, 1]");
            anchored = anchored || wc == 1.0;
        }
        if (!anchored)
            throw std::invalid_argument(
                "AnatomicalWeights: voxel with no fully admissible class (contracts contradict)");
    }
}

AnatomicalWeights build_anatomical(const LabelSpace& space, const std::vector<MaskVolume>& masks,
                                   const std::vector<double>& margins_mm, ThresholdKind kind) {
    const int k = space.size();
    if (static_cast<int>(masks.size()) != k)
        throw std::invalid_argument("build_anatomical: one mask per class required");
    if (static_cast<int>(margins_mm.size()) != k)
        throw std::invalid_argument("build_anatomical: one margin per class required");

    const GridMeta meta = masks.front().meta;
    for (const auto& m : masks) {
        m.validate();
        if (!(m.meta == meta)) throw std::invalid_argument("build_anatomical: grid mismatch");
    }
    const std::size_t n = meta.voxel_count();
    for (std::size_t v = 0; v < n; ++v) {
        int owners = 0;
        for (const auto& m : masks) owners += (m.data[v] != 0);
        if (owners != 1)
            throw std::invalid_argument("build_anatomical: masks must partition the grid");
    }

    AnatomicalWeights aw;
    aw.space = space;
    aw.meta = meta;
    aw.w.assign(n * static_cast<std::size_t>(k), 0.0);
    for (int c = 0; c < k; ++c) {
        const ThresholdingFn phi{kind, margins_mm[c]};
        const ScalarVolume d = distance_transform(masks[c]);
        parallel_for(n, [&](std::size_t begin, std::size_t end) {
            for (std::size_t v = begin; v < end; ++v)
                aw.w[v * static_cast<std::size_t>(k) + c] = phi(d.data[v]);
        });
    }
    aw.validate();
    return aw;
}

Bpa anatomical_class_bpa(const LabelSpace& space, int cls, double weight) {
    if (!(weight >= 0.0 && weight <= 1.0))
        throw std::invalid_argument("anatomical_class_bpa: weight outside [0, 1]");
    const SubsetMask full = space.full_set();
    return Bpa(space, {{full.without(cls), 1.0 - weight}, {full, weight}});
}

double anatomical_mass(std::span<const double> weights, SubsetMask c_prime) {
    double product = 1.0;
    for (std::size_t c = 0; c < weights.size(); ++c)
        product *= c_prime.contains(static_cast<int>(c)) ? 1.0 - weights[c] : weights[c];
    return product;
}

Bpa anatomical_bpa(const LabelSpace& space, std::span<const double> weights) {
    if (weights.size() != static_cast<std::size_t>(space.size()))
        throw std::invalid_argument("anatomical_bpa: one weight per class required");
    const SubsetMask full = space.full_set();
    std::vector<std::pair<SubsetMask, double>> masses;
    for (std::uint32_t bits = 0; bits <= full.bits(); ++bits) {
        const SubsetMask c_prime(bits);
        const double m = anatomical_mass(weights, c_prime);
        if (m != 0.0) masses.emplace_back(c_prime.complement(space.size()), m);
    }
    return Bpa(space, masses);
}

void apply_anatomical_raw(std::span<const double> p, std::span<const double> weights,
                          std::span<double> out) {
    double denom = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) {
        out[c] = p[c] * weights[c];
        denom += out[c];
    }
    if (denom <= kContradictionSlack)
        throw std::domain_error("apply_anatomical: probability completely contradicts contracts");
    for (auto& v : out) v /= denom;
}

ClassProbability apply_anatomical(const ClassProbability& p, std::span<const double> weights) {
    if (weights.size() != static_cast<std::size_t>(p.size()))
        throw std::invalid_argument("apply_anatomical: one weight per class required");
    std::vector<double> out(p.size());
    apply_anatomical_raw(p.values(), weights, out);
    return ClassProbability(p.space(), std::move(out));
}

// ---- intensity contract ----

void Gmm2::validate() const {
    if (!(sigma_low > 0.0) || !(sigma_high > 0.0))
        throw std::invalid_argument("Gmm2: sigmas must be positive");
    if (std::abs(pi_low + pi_high - 1.0) > 1e-9)
        throw std::invalid_argument("Gmm2: mixing weights must sum to 1");
    if (pi_low < 0.0 || pi_high < 0.0)
        throw std::invalid_argument("Gmm2: mixing weights must be non-negative");
    if (mu_low > mu_high) throw std::invalid_argument("Gmm2: components out of order");
}

namespace {

double log_normal_pdf(double x, double mu, double sigma) {
    const double z = (x - mu) / sigma;
    return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * M_PI);
}

double sorted_percentile(const std::vector<double>& sorted, double q) {
    const double rank = q / 100.0 * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(rank);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (rank - lo) * (sorted[lo + 1] - sorted[lo]);
}

} // namespace

Gmm2Fit fit_gmm2(const std::vector<double>& intensities) {
    constexpr int kMaxIters = 500;
    constexpr double kRelTol = 1e-8;

    if (intensities.size() < 20)
        throw std::invalid_argument("fit_gmm2: need at least 20 samples");
    const auto [mn_it, mx_it] = std::minmax_element(intensities.begin(), intensities.end());
    const double range = *mx_it - *mn_it;
    if (!(range > 0.0)) throw std::invalid_argument("fit_gmm2: degenerate data (all samples equal)");
    const double sigma_floor = 1e-6 * range;

    std::vector<double> sorted = intensities;
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(intensities.size());
    const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
    double var = 0.0;
    for (double x : sorted) var += (x - mean) * (x - mean);
    var /= n;

    Gmm2 g;
    g.mu_low = sorted_percentile(sorted, 25.0);
    g.mu_high = sorted_percentile(sorted, 75.0);
    g.sigma_low = g.sigma_high = std::max(std::sqrt(var), sigma_floor);
    g.pi_low = g.pi_high = 0.5;

    Gmm2Fit fit;
    std::vector<double> resp_high(intensities.size());
    double prev_ll = -std::numeric_limits<double>::infinity();
    bool converged = false;

    for (int iter = 0; iter < kMaxIters; ++iter) {
        // E step (and the log-likelihood of the current parameters)
        double ll = 0.0;
        for (std::size_t i = 0; i < intensities.size(); ++i) {
            const double x = intensities[i];
            const double a = std::log(g.pi_high) + log_normal_pdf(x, g.mu_high, g.sigma_high);
            const double b = std::log(g.pi_low) + log_normal_pdf(x, g.mu_low, g.sigma_low);
            const double mx = std::max(a, b);
            ll += mx + std::log(std::exp(a - mx) + std::exp(b - mx));
            resp_high[i] = 1.0 / (1.0 + std::exp(b - a));
        }
        fit.log_likelihood.push_back(ll);
        fit.iterations = iter + 1;
        if (iter > 0 && std::abs(ll - prev_ll) <= kRelTol * std::max(1.0, std::abs(ll))) {
            converged = true;
            break;
        }
        prev_ll = ll;

        // M step
        double nh = 0.0, sh = 0.0, nl = 0.0, sl = 0.0;
        for (std::size_t i = 0; i < intensities.size(); ++i) {
            nh += resp_high[i];
            sh += resp_high[i] * intensities[i];
            nl += 1.0 - resp_high[i];
            sl += (1.0 - resp_high[i]) * intensities[i];
        }
        if (nh > 1e-12) g.mu_high = sh / nh;
        if (nl > 1e-12) g.mu_low = sl / nl;
        double vh = 0.0, vl = 0.0;
        for (std::size_t i = 0; i < intensities.size(); ++i) {
            const double dh = intensities[i] - g.mu_high;
            const double dl = intensities[i] - g.mu_low;
            vh += resp_high[i] * dh * dh;
            vl += (1.0 - resp_high[i]) * dl * dl;
        }
        g.sigma_high = std::max(nh > 1e-12 ? std::sqrt(vh / nh) : sigma_floor, sigma_floor);
        g.sigma_low = std::max(nl > 1e-12 ? std::sqrt(vl / nl) : sigma_floor, sigma_floor);
        g.pi_high = nh / n;
        g.pi_low = nl / n;
    }
    if (!converged)
        throw numerical_error("fit_gmm2: EM did not converge within 500 iterations");

    if (g.mu_low > g.mu_high) {
        std::swap(g.mu_low, g.mu_high);
        std::swap(g.sigma_low, g.sigma_high);
        std::swap(g.pi_low, g.pi_high);
    }
    g.validate();
    fit.model = g;
    return fit;
}

std::vector<double> masked_intensities(const ScalarVolume& image, const MaskVolume& mask) {
    if (!(image.meta == mask.meta))
        throw std::invalid_argument("masked_intensities: grid mismatch");
    std::vector<double> out;
    out.reserve(mask.foreground_count());
    for (std::size_t v = 0; v < mask.data.size(); ++v)
        if (mask.data[v]) out.push_back(image.data[v]);
    return out;
}

double intensity_boost_ratio(double intensity, const Gmm2& gmm) {
    gmm.validate();
    // Pure component likelihood ratio; mixing weights deliberately excluded.
    const double a = -std::log(gmm.sigma_high) -
                     0.5 * std::pow((intensity - gmm.mu_high) / gmm.sigma_high, 2);
    const double b = -std::log(gmm.sigma_low) -
                     0.5 * std::pow((intensity - gmm.mu_low) / gmm.sigma_low, 2);
    return std::exp(std::min(a - b, 700.0)); // keep the ratio finite
}

Bpa intensity_bpa(double intensity, const Gmm2& gmm, SubsetMask c_high, const LabelSpace& space) {
    if (c_high.empty()) throw std::invalid_argument("intensity_bpa: C_high must be non-empty");
    if (c_high == space.full_set())
        throw std::invalid_argument("intensity_bpa: C_high must be a proper subset");
    const double r = intensity_boost_ratio(intensity, gmm);
    const double m_full = 1.0 / (1.0 + r); // strictly positive for finite r
    const double m_high = 1.0 - m_full;
    return Bpa(space, {{c_high, m_high}, {space.full_set(), m_full}});
}

void apply_intensity_raw(std::span<const double> p, SubsetMask c_high, double ratio,
                         std::span<double> out) {
    double sum = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) {
        out[c] = c_high.contains(static_cast<int>(c)) ? p[c] * (1.0 + ratio) : p[c];
        sum += out[c];
    }
    for (auto& v : out) v /= sum;
}

ClassProbability apply_intensity(const ClassProbability& p, const Bpa& m) {
    const SubsetMask full = p.space().full_set();
    SubsetMask c_high = SubsetMask::empty_set();
    double m_high = 0.0, m_full = 0.0;
    for (const auto& [subset, value] : m.focal()) {
        if (subset == full) {
            m_full = value;
        } else {
            if (!c_high.empty() && !(subset == c_high))
                throw std::invalid_argument("apply_intensity: BPA is not two-focal on {C_high, C}");
            c_high = subset;
            m_high = value;
        }
    }
    if (!(m_full > 0.0)) throw std::invalid_argument("apply_intensity: m(C) must be positive");
    if (m_high == 0.0) return p; // vacuous limit
    std::vector<double> out(p.size());
    apply_intensity_raw(p.values(), c_high, m_high / m_full, out);
    return ClassProbability(p.space(), std::move(out));
}

} // namespace veritas
