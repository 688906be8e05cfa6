#pragma once

#include <filesystem>
#include <initializer_list>
#include <string_view>

#include "json.hpp"

namespace icgkit {

using Json = nlohmann::json;

// Rounds to `digits` significant decimal digits so serialized output is stable.
double round_significant(double v, int digits = 9);

// Number node at 9 significant digits; non-finite values become null.
Json json_number(double v);

// Reads a number node, accepting null as NaN.
double json_to_double(const Json& j);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

// Throws ConfigError naming the first key of `obj` not in `allowed`.
void reject_unknown_keys(const Json& obj, std::initializer_list<std::string_view> allowed,
                         std::string_view context);

template <typename T>
void read_key(const Json& obj, const char* key, T& out) {
    if (auto it = obj.find(key); it != obj.end()) out = it->template get<T>();
}

}  // namespace icgkit
