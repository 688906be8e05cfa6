#include "icgkit/json_util.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "icgkit/error.hpp"

namespace icgkit {

double round_significant(double v, int digits) {
    if (!std::isfinite(v) || v == 0.0) return v;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return std::strtod(buf, nullptr);
}

Json json_number(double v) {
    if (!std::isfinite(v)) return nullptr;
    return round_significant(v);
}

double json_to_double(const Json& j) {
    if (j.is_null()) return std::nan("");
    return j.get<double>();
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open JSON file '" + path.string() + "'");
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw FormatError("malformed JSON in '" + path.string() + "': " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write JSON file '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

void reject_unknown_keys(const Json& obj, std::initializer_list<std::string_view> allowed,
                         std::string_view context) {
    if (!obj.is_object()) {
        throw ConfigError(std::string(context) + ": expected a JSON object");
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (auto k : allowed) known = known || (k == it.key());
        if (!known) {
            throw ConfigError(std::string(context) + ": unknown key '" + it.key() + "'");
        }
    }
}

}  // namespace icgkit
