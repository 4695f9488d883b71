#include "veritas/labelset.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace veritas {

void SoftPrediction::validate(double tol) const {
    if (classes < 1) throw std::invalid_argument("SoftPrediction: classes must be >= 1");
    if (p.size() != voxels * static_cast<std::size_t>(classes))
        throw std::invalid_argument("SoftPrediction: payload size mismatch");
    for (std::size_t i = 0; i < voxels; ++i) {
        double sum = 0.0;
        for (int c = 0; c < classes; ++c) {
            const double v = at(i, c);
            if (!std::isfinite(v) || v < 0.0)
                throw std::invalid_argument("SoftPrediction: negative or non-finite entry");
            sum += v;
        }
        if (std::abs(sum - 1.0) > tol)
            throw std::invalid_argument("SoftPrediction: row sum off unity");
    }
}

void PartialAnnotation::validate() const {
    if (classes < 1) throw std::invalid_argument("PartialAnnotation: classes must be >= 1");
    const std::uint32_t limit = std::uint32_t(1) << classes;
    for (const auto m : g) {
        if (m.empty()) throw std::invalid_argument("PartialAnnotation: empty voxel subset");
        if (m.bits() >= limit)
            throw std::invalid_argument("PartialAnnotation: subset outside the class set");
    }
}

namespace {

void check_shapes(const SoftPrediction& p, const PartialAnnotation& g) {
    if (p.classes != g.classes || p.voxels != g.g.size())
        throw std::invalid_argument("label-set loss: shape mismatch between p and g");
}

} // namespace

SoftPrediction marginalize(const SoftPrediction& p, const PartialAnnotation& g) {
    check_shapes(p, g);
    SoftPrediction out = p;
    for (std::size_t i = 0; i < p.voxels; ++i) {
        const SubsetMask gi = g.g[i];
        const int size = gi.count();
        if (size <= 1) continue;
        double total = 0.0;
        for (int c = 0; c < p.classes; ++c)
            if (gi.contains(c)) total += p.at(i, c);
        const double mean = total / size;
        for (int c = 0; c < p.classes; ++c)
            if (gi.contains(c)) out.at(i, c) = mean;
    }
    return out;
}

SoftPrediction psi0(const PartialAnnotation& g) {
    g.validate();
    SoftPrediction out;
    out.voxels = g.g.size();
    out.classes = g.classes;
    out.p.assign(out.voxels * g.classes, 0.0);
    for (std::size_t i = 0; i < out.voxels; ++i) {
        const SubsetMask gi = g.g[i];
        const double u = 1.0 / gi.count();
        for (int c = 0; c < g.classes; ++c)
            if (gi.contains(c)) out.at(i, c) = u;
    }
    return out;
}

namespace {

double powa(double x, int alpha) { return alpha == 1 ? x : x * x; }

void check_alpha(int alpha) {
    if (alpha != 1 && alpha != 2)
        throw std::invalid_argument("label-set loss: alpha must be 1 or 2");
}

} // namespace

double mean_class_dice(const SoftPrediction& p, const SoftPrediction& q, int alpha, double eps) {
    check_alpha(alpha);
    if (p.classes != q.classes || p.voxels != q.voxels)
        throw std::invalid_argument("mean_class_dice: shape mismatch");
    double acc = 0.0;
    for (int c = 0; c < p.classes; ++c) {
        double num = 0.0, dp = 0.0, dq = 0.0;
        for (std::size_t i = 0; i < p.voxels; ++i) {
            num += q.at(i, c) * p.at(i, c);
            dp += powa(p.at(i, c), alpha);
            dq += powa(q.at(i, c), alpha);
        }
        acc += 2.0 * num / (dq + dp + eps);
    }
    return 1.0 - acc / p.classes;
}

std::vector<double> mean_class_dice_grad(const SoftPrediction& p, const SoftPrediction& q,
                                         int alpha, double eps) {
    check_alpha(alpha);
    if (p.classes != q.classes || p.voxels != q.voxels)
        throw std::invalid_argument("mean_class_dice_grad: shape mismatch");
    std::vector<double> grad(p.p.size(), 0.0);
    for (int c = 0; c < p.classes; ++c) {
        double num = 0.0, dp = 0.0, dq = 0.0;
        for (std::size_t i = 0; i < p.voxels; ++i) {
            num += q.at(i, c) * p.at(i, c);
            dp += powa(p.at(i, c), alpha);
            dq += powa(q.at(i, c), alpha);
        }
        const double den = dq + dp + eps;
        for (std::size_t i = 0; i < p.voxels; ++i) {
            const double dnum = q.at(i, c);
            const double dden = alpha == 1 ? 1.0 : 2.0 * p.at(i, c);
            grad[i * p.classes + c] = -(2.0 * dnum * den - 2.0 * num * dden) / (den * den) /
                                      p.classes;
        }
    }
    return grad;
}

namespace {

// In the one-non-singleton pattern, finds L' (empty when g is all
// singletons) and validates the structure leaf-Dice requires.
SubsetMask leaf_dice_superset(const PartialAnnotation& g) {
    SubsetMask super = SubsetMask::empty_set();
    for (const auto m : g.g) {
        if (m.count() <= 1) continue;
        if (super.empty()) {
            super = m;
        } else if (!(super == m)) {
            throw std::invalid_argument(
                "leaf_dice: more than one non-singleton label-set in the annotation");
        }
    }
    if (!super.empty())
        for (const auto m : g.g)
            if (m.count() == 1 && super.contains(m.sole_class()))
                throw std::invalid_argument(
                    "leaf_dice: singleton annotation inside the unannotated label-set");
    return super;
}

} // namespace

double leaf_dice(const SoftPrediction& p, const PartialAnnotation& g, int alpha, double eps) {
    check_alpha(alpha);
    check_shapes(p, g);
    leaf_dice_superset(g);
    double acc = 0.0;
    for (int c = 0; c < p.classes; ++c) {
        const SubsetMask singleton = SubsetMask::singleton(c);
        double num = 0.0, ones = 0.0, dp = 0.0;
        for (std::size_t i = 0; i < p.voxels; ++i) {
            if (g.g[i] == singleton) {
                num += p.at(i, c);
                ones += 1.0;
            }
            dp += powa(p.at(i, c), alpha);
        }
        acc += 2.0 * num / (ones + dp + eps); // 1(.)^alpha = 1(.)
    }
    return 1.0 - acc / p.classes;
}

std::vector<double> leaf_dice_grad(const SoftPrediction& p, const PartialAnnotation& g, int alpha,
                                   double eps) {
    check_alpha(alpha);
    check_shapes(p, g);
    leaf_dice_superset(g);
    std::vector<double> grad(p.p.size(), 0.0);
    for (int c = 0; c < p.classes; ++c) {
        const SubsetMask singleton = SubsetMask::singleton(c);
        double num = 0.0, ones = 0.0, dp = 0.0;
        for (std::size_t i = 0; i < p.voxels; ++i) {
            if (g.g[i] == singleton) {
                num += p.at(i, c);
                ones += 1.0;
            }
            dp += powa(p.at(i, c), alpha);
        }
        const double den = ones + dp + eps;
        for (std::size_t i = 0; i < p.voxels; ++i) {
            const double dnum = g.g[i] == singleton ? 1.0 : 0.0;
            const double dden = alpha == 1 ? 1.0 : 2.0 * p.at(i, c);
            grad[i * p.classes + c] = -(2.0 * dnum * den - 2.0 * num * dden) / (den * den) /
                                      p.classes;
        }
    }
    return grad;
}

double marginal_dice(const SoftPrediction& p, const PartialAnnotation& g, int alpha, double eps) {
    check_shapes(p, g);
    return mean_class_dice(marginalize(p, g), psi0(g), alpha, eps);
}

std::vector<double> marginal_dice_grad(const SoftPrediction& p, const PartialAnnotation& g,
                                       int alpha, double eps) {
    check_shapes(p, g);
    const SoftPrediction phi = marginalize(p, g);
    const std::vector<double> inner = mean_class_dice_grad(phi, psi0(g), alpha, eps);
    // Chain through Phi: in-set coordinates feed 1/|g_i| of every in-set
    // channel; out-of-set coordinates pass straight through.
    std::vector<double> grad(p.p.size(), 0.0);
    for (std::size_t i = 0; i < p.voxels; ++i) {
        const SubsetMask gi = g.g[i];
        const int size = gi.count();
        double in_set_sum = 0.0;
        for (int c = 0; c < p.classes; ++c)
            if (gi.contains(c)) in_set_sum += inner[i * p.classes + c];
        for (int c = 0; c < p.classes; ++c)
            grad[i * p.classes + c] =
                gi.contains(c) ? in_set_sum / size : inner[i * p.classes + c];
    }
    return grad;
}

double soft_target_dice(const SoftPrediction& p, const PartialAnnotation& g, int alpha,
                        double eps) {
    check_shapes(p, g);
    return mean_class_dice(p, psi0(g), alpha, eps);
}

double marginal_cross_entropy(const SoftPrediction& p, const PartialAnnotation& g) {
    check_shapes(p, g);
    const SoftPrediction phi = marginalize(p, g);
    const SoftPrediction target = psi0(g);
    constexpr double kFloor = 1e-12;
    double acc = 0.0;
    for (std::size_t i = 0; i < p.voxels; ++i)
        for (int c = 0; c < p.classes; ++c) {
            const double t = target.at(i, c);
            if (t > 0.0) acc -= t * std::log(std::max(phi.at(i, c), kFloor));
        }
    return acc / static_cast<double>(p.voxels);
}

AxiomReport axiom_check(const LabelSetLossFn& loss, std::size_t trials, std::uint64_t seed,
                        std::size_t voxels, int classes) {
    if (trials < 1) throw std::invalid_argument("axiom_check: trials must be >= 1");
    if (classes < 3) throw std::invalid_argument("axiom_check: need >= 3 classes");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> coin(0, 1);

    AxiomReport report;
    report.trials = trials;
    for (std::size_t t = 0; t < trials; ++t) {
        // Random proper non-singleton L' (the unannotated label-set).
        const int first = std::uniform_int_distribution<int>(0, classes - 1)(rng);
        int second = std::uniform_int_distribution<int>(0, classes - 2)(rng);
        if (second >= first) ++second;
        SubsetMask super = SubsetMask::singleton(first).with(second);
        for (int c = 0; c < classes; ++c)
            if (!super.contains(c) && super.count() < classes - 1 && coin(rng))
                super = super.with(c);

        PartialAnnotation g;
        g.classes = classes;
        g.g.resize(voxels);
        std::vector<int> outside;
        for (int c = 0; c < classes; ++c)
            if (!super.contains(c)) outside.push_back(c);
        for (std::size_t i = 0; i < voxels; ++i) {
            if (coin(rng)) {
                g.g[i] = super;
            } else {
                const int pick = std::uniform_int_distribution<int>(
                    0, static_cast<int>(outside.size()) - 1)(rng);
                g.g[i] = SubsetMask::singleton(outside[pick]);
            }
        }

        SoftPrediction p;
        p.voxels = voxels;
        p.classes = classes;
        p.p.resize(voxels * classes);
        for (std::size_t i = 0; i < voxels; ++i) {
            double sum = 0.0;
            for (int c = 0; c < classes; ++c) {
                p.at(i, c) = unit(rng) + 1e-9;
                sum += p.at(i, c);
            }
            for (int c = 0; c < classes; ++c) p.at(i, c) /= sum;
        }

        // Mass-preserving in-set redistribution of p.
        SoftPrediction q = p;
        for (std::size_t i = 0; i < voxels; ++i) {
            const SubsetMask gi = g.g[i];
            if (gi.count() <= 1) continue;
            double total = 0.0;
            for (int c = 0; c < classes; ++c)
                if (gi.contains(c)) total += p.at(i, c);
            double wsum = 0.0;
            std::vector<double> parts(classes, 0.0);
            for (int c = 0; c < classes; ++c)
                if (gi.contains(c)) {
                    parts[c] = unit(rng) + 1e-9;
                    wsum += parts[c];
                }
            for (int c = 0; c < classes; ++c)
                if (gi.contains(c)) q.at(i, c) = total * parts[c] / wsum;
        }

        const double base = loss(p, g);
        const double via_phi = loss(marginalize(p, g), g);
        const double via_redist = loss(q, g);
        report.max_marginalization_violation =
            std::max(report.max_marginalization_violation, std::abs(base - via_phi));
        report.max_redistribution_violation =
            std::max(report.max_redistribution_violation, std::abs(base - via_redist));
    }
    return report;
}

} // namespace veritas
