#include "veritas/label_space.hpp"

#include <set>
#include <sstream>

namespace veritas {

LabelSpace::LabelSpace(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.size() < 2)
        throw std::invalid_argument("LabelSpace: need at least 2 classes");
    if (names_.size() > static_cast<std::size_t>(kMaxClasses))
        throw std::invalid_argument("LabelSpace: at most " + std::to_string(kMaxClasses) +
                                    " classes supported");
    std::set<std::string> seen;
    for (const auto& n : names_) {
        if (n.empty()) throw std::invalid_argument("LabelSpace: empty class name");
        if (!seen.insert(n).second)
            throw std::invalid_argument("LabelSpace: duplicate class name '" + n + "'");
    }
}

int LabelSpace::index_of(const std::string& name) const {
    for (int i = 0; i < size(); ++i)
        if (names_[i] == name) return i;
    throw std::invalid_argument("LabelSpace: unknown class '" + name + "'");
}

std::string LabelSpace::subset_name(SubsetMask subset) const {
    if (subset.bits() >= (1u << size()))
        throw std::invalid_argument("subset_name: mask has bits outside the label space");
    std::ostringstream out;
    bool first = true;
    for (int c = 0; c < size(); ++c) {
        if (!subset.contains(c)) continue;
        if (!first) out << '|';
        out << names_[c];
        first = false;
    }
    return out.str();
}

SubsetMask LabelSpace::parse_subset(const std::string& joined) const {
    SubsetMask mask;
    if (joined.empty()) return mask;
    std::istringstream in(joined);
    std::string part;
    while (std::getline(in, part, '|')) mask = mask.with(index_of(part));
    return mask;
}

} // namespace veritas
