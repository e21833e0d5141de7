#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <map>
#include <string>

#include "hash.hpp"
#include "io.hpp"

namespace lrat {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Everything needed to reproduce a run. The timestamp lives only here,
/// never in primary outputs.
struct Manifest {
    std::string command;
    Json config = Json::object();
    std::map<std::string, std::string> inputs;   // path -> content digest
    std::map<std::string, std::string> outputs;  // path -> content digest
    std::map<std::string, std::uint64_t> seeds;
    Json notes = Json::object();
    std::string status = "running";

    std::string config_hash() const { return Digest().add(config.dump()).hex(); }

    void add_input(const std::filesystem::path& p) { inputs[p.string()] = file_digest(p); }
    void add_output(const std::filesystem::path& p) { outputs[p.string()] = file_digest(p); }
};

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline Json to_json(const Manifest& m) {
    Json j;
    j["tool"] = "lrat";
    j["version"] = kToolVersion;
    j["command"] = m.command;
    j["status"] = m.status;
    j["timestamp"] = utc_timestamp();
    j["config_hash"] = m.config_hash();
    j["config"] = m.config;
    j["seeds"] = m.seeds;
    j["inputs"] = m.inputs;
    j["outputs"] = m.outputs;
    j["notes"] = m.notes;
    return j;
}

inline void write_manifest(const std::filesystem::path& path, const Manifest& m) {
    auto out = open_output(path);
    out << to_json(m).dump(2) << '\n';
}

}  // namespace lrat
