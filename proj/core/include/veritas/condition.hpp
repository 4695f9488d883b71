#pragma once
// Patient condition driving margin tables and atlas selection windows.

#include <stdexcept>
#include <string>

namespace veritas {

enum class Condition { neurotypical, spina_bifida, other_pathologies };

inline std::string to_string(Condition c) {
    switch (c) {
        case Condition::neurotypical: return "neurotypical";
        case Condition::spina_bifida: return "spina_bifida";
        case Condition::other_pathologies: return "other_pathologies";
    }
    throw std::logic_error("unreachable condition");
}

inline Condition condition_from_string(const std::string& s) {
    if (s == "neurotypical") return Condition::neurotypical;
    if (s == "spina_bifida") return Condition::spina_bifida;
    if (s == "other_pathologies") return Condition::other_pathologies;
    throw std::invalid_argument("unknown condition '" + s + "'");
}

} // namespace veritas
