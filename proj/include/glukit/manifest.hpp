// SPDX-License-Identifier: Apache-2.0
//
// Run manifest: a full snapshot of a command's configuration, written before
// any results, so a run can be replayed bit-identically.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace glukit {

struct RunManifest {
    int version = 1;
    std::string command;
    nlohmann::json config;                            // flag snapshot
    std::map<std::string, std::string> input_hashes;  // path -> fnv1a-64 hex
    std::vector<std::string> outputs;                 // paths relative to out dir
};

std::string manifest_json(const RunManifest& manifest);
RunManifest manifest_from_json(const std::string& text);
void save_manifest(const RunManifest& manifest, const std::string& path);
RunManifest load_manifest(const std::string& path);

/// FNV-1a 64-bit hash of a file's bytes, hex encoded.
std::string fnv1a_file_hex(const std::string& path);

}  // namespace glukit
