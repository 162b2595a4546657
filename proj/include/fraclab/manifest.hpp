#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fraclab/trainer.hpp"

#include <json.hpp>

namespace fraclab {

// FNV-1a 64-bit content hash, hex-encoded. Run ids are content addresses of
// (config text, seed), not cryptographic digests.
std::string content_hash(const std::string& text);
std::string run_id_for(const std::string& config_text, uint64_t seed);

// One row per telemetry point; floats are written with %.17g so re-reads and
// re-runs are bit-exact.
void write_trajectory_csv(const TrajectoryLog& log, const std::string& path);
TrajectoryLog read_trajectory_csv(const std::string& path);

struct Manifest {
  std::string run_id;
  std::string config_hash;
  uint64_t seed = 0;
  std::string config_text;
  std::vector<std::string> artifacts;  // paths relative to the run directory
  std::string created;                 // wall-clock; not part of the bitwise contract
  std::string tool_version;

  nlohmann::json to_json() const;
  static Manifest from_json(const nlohmann::json& j);
};

void write_manifest(const Manifest& m, const std::string& path);
Manifest read_manifest(const std::string& path);

// Flat binary checkpoint: little-endian uint64 header length, JSON header,
// then float64 payloads (params, adam moments when present).
void write_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint read_checkpoint(const std::string& path);

// Structural subset of JSON Schema: type / required / properties / items.
// Enough to pin the report format; returns false and fills err on mismatch.
bool json_schema_check(const nlohmann::json& doc, const nlohmann::json& schema,
                       std::string* err);

}  // namespace fraclab
