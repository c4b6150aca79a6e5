#include "keyshap/manifest.hpp"

#include <cstdio>

#include <json.hpp>

#include "keyshap/error.hpp"
#include "keyshap/io.hpp"
#include "keyshap/rng.hpp"

namespace keyshap {

std::string digest_bytes(std::string_view bytes) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

std::string digest_file(const std::filesystem::path& path) { return digest_bytes(read_text_file(path)); }

std::string RunManifest::to_json() const {
  nlohmann::ordered_json doc;
  doc["tool"] = tool;
  doc["version"] = version;
  doc["command"] = command;
  doc["argv"] = argv;
  doc["config"] = config;
  doc["seeds"] = seeds;
  doc["schema_hash"] = schema_hash;
  doc["oracle"] = oracle;
  doc["inputs"] = inputs;
  doc["outputs"] = outputs;
  return doc.dump(2) + "\n";
}

RunManifest RunManifest::from_json(std::string_view text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    RunManifest m;
    m.tool = doc.at("tool").get<std::string>();
    m.version = doc.at("version").get<std::string>();
    m.command = doc.at("command").get<std::string>();
    m.argv = doc.at("argv").get<std::vector<std::string>>();
    m.config = doc.value("config", std::map<std::string, std::string>{});
    m.seeds = doc.value("seeds", std::map<std::string, std::uint64_t>{});
    m.schema_hash = doc.value("schema_hash", "");
    m.oracle = doc.value("oracle", "");
    m.inputs = doc.value("inputs", std::map<std::string, std::string>{});
    m.outputs = doc.value("outputs", std::map<std::string, std::string>{});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kMalformedInput, std::string("bad run manifest: ") + e.what());
  }
}

}  // namespace keyshap
