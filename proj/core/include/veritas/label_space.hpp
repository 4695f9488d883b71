#pragma once
// Ordered class sets and bitmask subsets over them.
//
// A LabelSpace is the ordered list of segmentation classes. Subsets of the
// space are packed into a SubsetMask, one bit per class (class k <-> bit k).
// K is capped at 30 so every subset fits a uint32_t with headroom.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace veritas {

inline constexpr int kMaxClasses = 30;

class SubsetMask {
public:
    constexpr SubsetMask() = default;
    constexpr explicit SubsetMask(std::uint32_t bits) : bits_(bits) {}

    static constexpr SubsetMask empty_set() { return SubsetMask(0u); }
    static constexpr SubsetMask singleton(int cls) { return SubsetMask(1u << cls); }
    static constexpr SubsetMask full(int k) {
        return SubsetMask(k >= 32 ? ~0u : ((1u << k) - 1u));
    }

    constexpr std::uint32_t bits() const { return bits_; }
    constexpr bool contains(int cls) const { return (bits_ >> cls) & 1u; }
    constexpr bool empty() const { return bits_ == 0u; }
    int count() const { return __builtin_popcount(bits_); }

    constexpr SubsetMask operator&(SubsetMask o) const { return SubsetMask(bits_ & o.bits_); }
    constexpr SubsetMask operator|(SubsetMask o) const { return SubsetMask(bits_ | o.bits_); }
    // Complement relative to a K-class space.
    constexpr SubsetMask complement(int k) const { return SubsetMask(~bits_ & full(k).bits_); }
    constexpr SubsetMask with(int cls) const { return SubsetMask(bits_ | (1u << cls)); }
    constexpr SubsetMask without(int cls) const { return SubsetMask(bits_ & ~(1u << cls)); }

    constexpr bool operator==(const SubsetMask&) const = default;
    constexpr bool operator<(SubsetMask o) const { return bits_ < o.bits_; }

    // Index of the only set bit; the mask must be a singleton.
    int sole_class() const {
        if (count() != 1) throw std::logic_error("SubsetMask: not a singleton");
        return __builtin_ctz(bits_);
    }

private:
    std::uint32_t bits_ = 0;
};

class LabelSpace {
public:
    LabelSpace() = default;
    explicit LabelSpace(std::vector<std::string> names);

    int size() const { return static_cast<int>(names_.size()); }
    const std::string& name(int cls) const { return names_.at(cls); }
    const std::vector<std::string>& names() const { return names_; }

    // Index of a class name; throws if unknown.
    int index_of(const std::string& name) const;

    SubsetMask full_set() const { return SubsetMask::full(size()); }

    // Subsets are spelled as "|"-joined class names, e.g. "csf|background".
    // The empty subset is spelled "".
    std::string subset_name(SubsetMask subset) const;
    SubsetMask parse_subset(const std::string& joined) const;

    bool operator==(const LabelSpace&) const = default;

private:
    std::vector<std::string> names_;
};

} // namespace veritas
