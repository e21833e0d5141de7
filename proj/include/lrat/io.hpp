#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "error.hpp"
#include "hash.hpp"

namespace lrat {

using Json = nlohmann::ordered_json;

inline std::ifstream open_input(const std::filesystem::path& path, bool binary = false) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) throw InputError("cannot open input file: " + path.string());
    return in;
}

inline std::ofstream open_output(const std::filesystem::path& path, bool binary = false) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) throw Error("cannot open output file: " + path.string());
    return out;
}

inline std::string read_file(const std::filesystem::path& path) {
    auto in = open_input(path, true);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string file_digest(const std::filesystem::path& path) {
    return Digest().add(read_file(path)).hex();
}

/// Calls `fn(line_number, json)` for every non-blank line; line numbers are
/// 1-based. Undecodable JSON raises ParseError with the line number.
inline void for_each_json_line(std::istream& in, const std::function<void(std::size_t, const Json&)>& fn) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        Json record;
        try {
            record = Json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
        }
        fn(line_no, record);
    }
}

/// Compact single-line dump; UTF-8 passes through unescaped.
inline std::string dump_line(const Json& j) { return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace); }

namespace field {

// Typed accessors raising ParseError with the field path on mismatch.

inline const Json& require(const Json& obj, std::string_view key, std::size_t line, const std::string& path) {
    if (!obj.is_object()) throw ParseError(line, "field '" + path + "': expected object");
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(line, "missing field '" + path + (path.empty() ? "" : ".") + std::string(key) + "'");
    return *it;
}

inline std::string string_at(const Json& obj, std::string_view key, std::size_t line, const std::string& path) {
    const Json& v = require(obj, key, line, path);
    if (!v.is_string()) throw ParseError(line, "field '" + path + (path.empty() ? "" : ".") + std::string(key) + "': expected string");
    return v.get<std::string>();
}

inline std::size_t index_at(const Json& obj, std::string_view key, std::size_t line, const std::string& path) {
    const Json& v = require(obj, key, line, path);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
        throw ParseError(line, "field '" + path + (path.empty() ? "" : ".") + std::string(key) + "': expected nonnegative integer");
    }
    return v.get<std::size_t>();
}

inline double number_at(const Json& obj, std::string_view key, std::size_t line, const std::string& path) {
    const Json& v = require(obj, key, line, path);
    if (!v.is_number()) throw ParseError(line, "field '" + path + (path.empty() ? "" : ".") + std::string(key) + "': expected number");
    return v.get<double>();
}

}  // namespace field

}  // namespace lrat
