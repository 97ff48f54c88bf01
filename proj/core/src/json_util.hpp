#pragma once

// Private helpers for reading JSON documents with located errors.

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "conftree/errors.hpp"

namespace conftree::detail {

using json = nlohmann::json;

inline json parse_json(std::string_view text, const std::string& source) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError(source + ": byte " + std::to_string(e.byte), e.what());
    }
}

inline const json& member(const json& obj, std::string_view key, const std::string& where) {
    if (!obj.is_object()) throw ParseError(where, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(where + "/" + std::string(key), "missing required key");
    return *it;
}

inline double as_double(const json& v, const std::string& where) {
    if (!v.is_number()) throw ParseError(where, "expected a number");
    return v.get<double>();
}

inline std::uint64_t as_u64(const json& v, const std::string& where) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        throw ParseError(where, "expected a nonnegative integer");
    return v.get<std::uint64_t>();
}

inline std::int64_t as_i64(const json& v, const std::string& where) {
    if (!v.is_number_integer()) throw ParseError(where, "expected an integer");
    return v.get<std::int64_t>();
}

inline bool as_bool(const json& v, const std::string& where) {
    if (!v.is_boolean()) throw ParseError(where, "expected a boolean");
    return v.get<bool>();
}

inline std::string as_string(const json& v, const std::string& where) {
    if (!v.is_string()) throw ParseError(where, "expected a string");
    return v.get<std::string>();
}

inline std::vector<double> as_doubles(const json& v, const std::string& where) {
    if (!v.is_array()) throw ParseError(where, "expected an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_double(v[i], where + "/" + std::to_string(i)));
    return out;
}

inline std::vector<int> as_ints(const json& v, const std::string& where) {
    if (!v.is_array()) throw ParseError(where, "expected an array of integers");
    std::vector<int> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(static_cast<int>(as_i64(v[i], where + "/" + std::to_string(i))));
    return out;
}

// Doubles are written with nlohmann's shortest round-trip formatting, so a
// dump/parse cycle reproduces every value exactly. Non-finite values have
// no JSON representation and are rejected.
inline json doubles_to_json(const std::vector<double>& values) {
    json arr = json::array();
    for (double v : values) {
        if (!std::isfinite(v)) throw InvalidArgument("cannot serialize a non-finite value");
        arr.push_back(v);
    }
    return arr;
}

}  // namespace conftree::detail
