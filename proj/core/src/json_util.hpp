#pragma once

#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "detdsci/errors.hpp"

namespace detdsci::detail {

/// Throws ConfigError naming every key of `obj` outside `allowed`.
inline void check_keys(const nlohmann::json& obj, std::initializer_list<std::string_view> allowed,
                       std::string_view where)
{
    if (!obj.is_object()) {
        throw ConfigError(fmt::format("{}: expected a JSON object", where));
    }
    std::vector<std::string> unknown;
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const auto a : allowed) {
            ok = ok || key == a;
        }
        if (!ok) {
            unknown.push_back(key);
        }
    }
    if (!unknown.empty()) {
        throw ConfigError(fmt::format("{}: unknown key(s) {}", where, fmt::join(unknown, ", ")));
    }
}

/// Typed field access with the key path in the error message.
template <typename T>
T required(const nlohmann::json& obj, const char* key, std::string_view where)
{
    const auto it = obj.find(key);
    if (it == obj.end()) {
        throw ConfigError(fmt::format("{}: missing '{}'", where, key));
    }
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("{}.{}: {}", where, key, e.what()));
    }
}

template <typename T>
T optional(const nlohmann::json& obj, const char* key, T fallback, std::string_view where)
{
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        return fallback;
    }
    return required<T>(obj, key, where);
}

}  // namespace detdsci::detail
