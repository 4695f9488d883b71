#pragma once
// Dempster-Shafer algebra: basic probability assignments over subsets of a
// label space, contradiction mass, Dempster's rule of combination, and the
// probability (+) BPA special case that stays a probability.
//
// This generic path is the reference oracle for the O(K) fast paths used by
// the contract machinery; it favours clarity over speed. Masses are stored
// densely over all 2^K subsets for K <= 12 and sparsely above.

#include "veritas/label_space.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

namespace veritas {

// Two BPAs are treated as completely contradictory once their conflict
// reaches 1 - kContradictionSlack, absorbing float noise around exact 1.
inline constexpr double kContradictionSlack = 1e-12;

class ClassProbability {
public:
    ClassProbability(LabelSpace space, std::vector<double> p);

    const LabelSpace& space() const { return space_; }
    int size() const { return space_.size(); }
    double operator[](int cls) const { return p_[cls]; }
    const std::vector<double>& values() const { return p_; }

private:
    LabelSpace space_;
    std::vector<double> p_;
};

class Bpa {
public:
    // The vacuous BPA: all mass on the full set (total ignorance).
    static Bpa vacuous(const LabelSpace& space);
    // Mass on singletons only, m({c}) = p(c).
    static Bpa from_probability(const ClassProbability& p);
    // From explicit focal masses; validates the BPA axioms.
    Bpa(LabelSpace space, const std::vector<std::pair<SubsetMask, double>>& masses);

    const LabelSpace& space() const { return space_; }
    int num_classes() const { return space_.size(); }

    double mass(SubsetMask subset) const;
    // Focal elements (nonzero mass), ascending by mask bits.
    std::vector<std::pair<SubsetMask, double>> focal() const;

    // Sum of masses over all supersets-intersecting {c}: sum_{F contains c} m(F).
    double singleton_plausibility(int cls) const;

private:
    Bpa() = default;
    void set_mass(SubsetMask subset, double value);
    void check_valid() const;

    LabelSpace space_;
    bool dense_ = true;
    std::vector<double> dense_masses_;          // size 2^K when dense
    std::map<std::uint32_t, double> sparse_masses_; // nonzero entries when sparse

    friend Bpa combine(const Bpa&, const Bpa&);
};

// Total mass on disjoint focal pairs: sum_{E ^ F = 0} m1(E) m2(F), in [0, 1].
// Value 1 means the two BPAs are completely contradictory.
double contradiction_mass(const Bpa& m1, const Bpa& m2);

// Conflict between a probability (viewed as a singleton BPA) and a BPA:
// 1 - sum_c p(c) * sum_{F contains c} m(F).
double contradiction_mass(const ClassProbability& p, const Bpa& m);

// Dempster's rule of combination. Throws on complete contradiction.
Bpa combine(const Bpa& m1, const Bpa& m2);

// Left fold of combine; the empty list yields the vacuous BPA on `space`.
Bpa combine_many(const LabelSpace& space, const std::vector<Bpa>& ms);

// Probability (+) BPA special case:
//   (p (+) m)(c) = p(c) * sum_{F contains c} m(F) / sum_{c'} p(c') * sum_{F contains c'} m(F)
// Throws on complete contradiction (zero denominator).
ClassProbability combine_prob(const ClassProbability& p, const Bpa& m);

// BPA JSON: { "classes": [...], "masses": { "a|b": 0.4, ... } } with subsets
// named by "|"-joined class names.
Bpa read_bpa_json(const std::filesystem::path& path);
void write_bpa_json(const Bpa& m, const std::filesystem::path& path);

} // namespace veritas
