#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "mqs/common/error.hpp"

namespace mqs::cli {

// A small, deterministic record of what a command was asked to do, written
// next to its outputs before any real work starts. Deliberately carries no
// timestamps so reruns of the same command produce identical bytes.
struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  std::map<std::string, std::string> extra;
};

inline nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json j;
  j["command"] = m.command;
  j["seed"] = m.seed;
  j["config_hash"] = std::to_string(m.config_hash);
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  for (const auto& [k, v] : m.extra) j[k] = v;
  return j;
}

inline void write_manifest(const std::string& path, const RunManifest& m) {
  std::ofstream out(path, std::ios::binary);
  MQS_CHECK(out.good(), IoError, "cannot write manifest: " + path);
  out << to_json(m).dump(2) << "\n";
  MQS_CHECK(out.good(), IoError, "failed writing manifest: " + path);
}

}  // namespace mqs::cli
