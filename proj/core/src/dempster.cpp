#include "veritas/dempster.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace veritas {

namespace {
constexpr int kDenseLimit = 12; // 2^12 doubles per BPA at most on the dense path

void check_same_space(const LabelSpace& a, const LabelSpace& b) {
    if (!(a == b)) throw std::invalid_argument("BPA/probability label spaces differ");
}
} // namespace

ClassProbability::ClassProbability(LabelSpace space, std::vector<double> p)
    : space_(std::move(space)), p_(std::move(p)) {
    if (p_.size() != static_cast<std::size_t>(space_.size()))
        throw std::invalid_argument("ClassProbability: wrong vector length");
    double sum = 0.0;
    for (double v : p_) {
        if (!std::isfinite(v) || v < 0.0)
            throw std::invalid_argument("ClassProbability: negative or non-finite entry");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("ClassProbability: entries must sum to 1 within 1e-9");
}

Bpa Bpa::vacuous(const LabelSpace& space) {
    Bpa m;
    m.space_ = space;
    m.dense_ = space.size() <= kDenseLimit;
    if (m.dense_) m.dense_masses_.assign(std::size_t(1) << space.size(), 0.0);
    m.set_mass(space.full_set(), 1.0);
    return m;
}

Bpa Bpa::from_probability(const ClassProbability& p) {
    Bpa m;
    m.space_ = p.space();
    m.dense_ = m.space_.size() <= kDenseLimit;
    if (m.dense_) m.dense_masses_.assign(std::size_t(1) << m.space_.size(), 0.0);
    for (int c = 0; c < p.size(); ++c)
        if (p[c] != 0.0) m.set_mass(SubsetMask::singleton(c), p[c]);
    return m;
}

Bpa::Bpa(LabelSpace space, const std::vector<std::pair<SubsetMask, double>>& masses)
    : space_(std::move(space)) {
    dense_ = space_.size() <= kDenseLimit;
    if (dense_) dense_masses_.assign(std::size_t(1) << space_.size(), 0.0);
    for (const auto& [subset, value] : masses) {
        if (subset.bits() >= (std::uint32_t(1) << space_.size()))
            throw std::invalid_argument("Bpa: subset outside the label space");
        set_mass(subset, mass(subset) + value);
    }
    check_valid();
}

void Bpa::set_mass(SubsetMask subset, double value) {
    if (dense_) {
        dense_masses_[subset.bits()] = value;
    } else if (value != 0.0) {
        sparse_masses_[subset.bits()] = value;
    } else {
        sparse_masses_.erase(subset.bits());
    }
}

double Bpa::mass(SubsetMask subset) const {
    if (dense_) return dense_masses_[subset.bits()];
    auto it = sparse_masses_.find(subset.bits());
    return it == sparse_masses_.end() ? 0.0 : it->second;
}

std::vector<std::pair<SubsetMask, double>> Bpa::focal() const {
    std::vector<std::pair<SubsetMask, double>> out;
    if (dense_) {
        for (std::uint32_t bits = 0; bits < dense_masses_.size(); ++bits)
            if (dense_masses_[bits] != 0.0) out.emplace_back(SubsetMask(bits), dense_masses_[bits]);
    } else {
        for (const auto& [bits, value] : sparse_masses_) out.emplace_back(SubsetMask(bits), value);
    }
    return out;
}

void Bpa::check_valid() const {
    double sum = 0.0;
    for (const auto& [subset, value] : focal()) {
        if (!std::isfinite(value) || value < 0.0)
            throw std::invalid_argument("Bpa: negative or non-finite mass");
        if (subset.empty() && value != 0.0)
            throw std::invalid_argument("Bpa: empty set must carry zero mass");
        sum += value;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("Bpa: masses must sum to 1 within 1e-9");
}

double Bpa::singleton_plausibility(int cls) const {
    double q = 0.0;
    for (const auto& [subset, value] : focal())
        if (subset.contains(cls)) q += value;
    return q;
}

double contradiction_mass(const Bpa& m1, const Bpa& m2) {
    check_same_space(m1.space(), m2.space());
    double kappa = 0.0;
    for (const auto& [e, me] : m1.focal())
        for (const auto& [f, mf] : m2.focal())
            if ((e & f).empty()) kappa += me * mf;
    return kappa;
}

double contradiction_mass(const ClassProbability& p, const Bpa& m) {
    check_same_space(p.space(), m.space());
    double compatible = 0.0;
    for (int c = 0; c < p.size(); ++c) compatible += p[c] * m.singleton_plausibility(c);
    return 1.0 - compatible;
}

Bpa combine(const Bpa& m1, const Bpa& m2) {
    check_same_space(m1.space(), m2.space());
    Bpa out;
    out.space_ = m1.space();
    out.dense_ = out.space_.size() <= kDenseLimit;
    if (out.dense_) out.dense_masses_.assign(std::size_t(1) << out.space_.size(), 0.0);

    for (const auto& [e, me] : m1.focal()) {
        for (const auto& [f, mf] : m2.focal()) {
            const SubsetMask both = e & f;
            if (!both.empty()) out.set_mass(both, out.mass(both) + me * mf);
        }
    }
    // Normalizing by the surviving mass (rather than 1 - conflict) avoids the
    // cancellation that would otherwise corrupt near-contradictory pairs.
    double kept = 0.0;
    for (const auto& [subset, value] : out.focal()) kept += value;
    if (kept < kContradictionSlack)
        throw std::domain_error("Dempster combination of completely contradictory BPAs");
    for (const auto& [subset, value] : out.focal()) out.set_mass(subset, value / kept);
    return out;
}

Bpa combine_many(const LabelSpace& space, const std::vector<Bpa>& ms) {
    Bpa acc = Bpa::vacuous(space);
    for (const Bpa& m : ms) acc = combine(acc, m);
    return acc;
}

ClassProbability combine_prob(const ClassProbability& p, const Bpa& m) {
    check_same_space(p.space(), m.space());
    std::vector<double> out(p.size());
    double denom = 0.0;
    for (int c = 0; c < p.size(); ++c) {
        out[c] = p[c] * m.singleton_plausibility(c);
        denom += out[c];
    }
    if (denom <= kContradictionSlack)
        throw std::domain_error("combine_prob: probability completely contradicts the BPA");
    for (double& v : out) v /= denom;
    return ClassProbability(p.space(), std::move(out));
}

Bpa read_bpa_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open BPA file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed BPA file " + path.string() + ": " + e.what());
    }
    try {
        const LabelSpace space(j.at("classes").get<std::vector<std::string>>());
        std::vector<std::pair<SubsetMask, double>> masses;
        for (const auto& [name, value] : j.at("masses").items())
            masses.emplace_back(space.parse_subset(name), value.get<double>());
        return Bpa(space, masses);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed BPA file " + path.string() + ": " + e.what());
    }
}

void write_bpa_json(const Bpa& m, const std::filesystem::path& path) {
    nlohmann::json j;
    j["classes"] = m.space().names();
    j["masses"] = nlohmann::json::object();
    for (const auto& [subset, value] : m.focal())
        j["masses"][m.space().subset_name(subset)] = value;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write BPA file: " + path.string());
    out << j.dump(2) << '\n';
}

} // namespace veritas
