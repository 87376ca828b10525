#pragma once

#include <json.hpp>

#include <string>

namespace lure::detail {

/// Pretty-prints objects with the given indent but keeps arrays of scalars,
/// and short arrays of such arrays (matrices), on a single line.
template <class Json>
std::string dump_readable(const Json& j, int indent = 2, int depth = 0) {
    const auto flat = [](const Json& a) {
        if (!a.is_array()) return false;
        if (a.size() > 8 && a.front().is_array()) return false;  // long tables: one row per line
        for (const auto& e : a) {
            if (e.is_object()) return false;
            if (e.is_array()) {
                for (const auto& f : e) {
                    if (f.is_structured()) return false;
                }
            }
        }
        return true;
    };
    if (!j.is_structured() || flat(j) || j.empty()) return j.dump(-1, ' ', false, Json::error_handler_t::replace);
    const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
    const std::string close(static_cast<std::size_t>(indent * depth), ' ');
    std::string out = j.is_object() ? "{\n" : "[\n";
    bool first = true;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad;
        if (j.is_object()) out += Json(it.key()).dump() + ": ";
        out += dump_readable(*it, indent, depth + 1);
    }
    out += "\n" + close + (j.is_object() ? "}" : "]");
    return out;
}

}  // namespace lure::detail
