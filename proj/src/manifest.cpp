// SPDX-License-Identifier: Apache-2.0
#include "glukit/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace glukit {

std::string manifest_json(const RunManifest& m) {
    nlohmann::json j;
    j["format"] = "glukit-manifest";
    j["version"] = m.version;
    j["command"] = m.command;
    j["config"] = m.config;
    j["input_hashes"] = m.input_hashes;
    j["outputs"] = m.outputs;
    return j.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != "glukit-manifest")
        throw std::invalid_argument("not a glukit manifest");
    RunManifest m;
    m.version = j.at("version").get<int>();
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config");
    m.input_hashes = j.at("input_hashes").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    return m;
}

void save_manifest(const RunManifest& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out << manifest_json(m);
    if (!out) throw std::runtime_error("write failed: " + path);
}

RunManifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return manifest_from_json(ss.str());
}

std::string fnv1a_file_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for hashing: " + path);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 0x100000001b3ULL;
        }
        if (!in) break;
    }
    char hex[24];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
    return hex;
}

}  // namespace glukit
