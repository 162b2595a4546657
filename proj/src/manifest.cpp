#include "fraclab/manifest.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>

namespace fraclab {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s == "nan" || s == "-nan") {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return std::stod(s);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string content_hash(const std::string& text) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

std::string run_id_for(const std::string& config_text, uint64_t seed) {
  return content_hash(config_text + "\nseed=" + std::to_string(seed));
}

void write_trajectory_csv(const TrajectoryLog& log, const std::string& path) {
  std::ofstream f(path);
  if (!f) {
    throw DataError("cannot open for writing: " + path);
  }
  const size_t layers = log.per_layer.empty() ? 0 : log.per_layer[0].size();
  f << "step,displacement,increment,train_loss,gen_error,llc,llc_std_err,"
       "llc_negative";
  for (size_t l = 0; l < layers; ++l) {
    f << ",layer" << l;
  }
  f << "\n";
  for (size_t i = 0; i < log.rows(); ++i) {
    f << log.steps[i] << ',' << fmt_double(log.displacement[i]) << ','
      << fmt_double(log.increment[i]) << ',' << fmt_double(log.train_loss[i])
      << ',' << fmt_double(log.gen_error[i]) << ',' << fmt_double(log.llc[i])
      << ',' << fmt_double(log.llc_std_err[i]) << ','
      << int(log.llc_negative[i]);
    for (size_t l = 0; l < layers; ++l) {
      f << ',' << fmt_double(log.per_layer[i][l]);
    }
    f << "\n";
  }
}

TrajectoryLog read_trajectory_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    throw DataError("cannot open trajectory csv: " + path);
  }
  std::string line;
  if (!std::getline(f, line)) {
    throw DataError("empty trajectory csv: " + path);
  }
  const auto header = split_csv_line(line);
  size_t layers = 0;
  for (const std::string& h : header) {
    if (h.rfind("layer", 0) == 0) {
      layers++;
    }
  }
  TrajectoryLog log;
  while (std::getline(f, line)) {
    if (line.empty()) {
      continue;
    }
    const auto cells = split_csv_line(line);
    if (cells.size() != 8 + layers) {
      throw DataError("malformed trajectory csv row in " + path);
    }
    log.steps.push_back(std::stoll(cells[0]));
    log.displacement.push_back(parse_double(cells[1]));
    log.increment.push_back(parse_double(cells[2]));
    log.train_loss.push_back(parse_double(cells[3]));
    log.gen_error.push_back(parse_double(cells[4]));
    log.llc.push_back(parse_double(cells[5]));
    log.llc_std_err.push_back(parse_double(cells[6]));
    log.llc_negative.push_back(static_cast<uint8_t>(std::stoi(cells[7])));
    std::vector<double> pl(layers);
    for (size_t l = 0; l < layers; ++l) {
      pl[l] = parse_double(cells[8 + l]);
    }
    log.per_layer.push_back(std::move(pl));
  }
  return log;
}

nlohmann::json Manifest::to_json() const {
  nlohmann::json j;
  j["run_id"] = run_id;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["config"] = config_text;
  j["artifacts"] = artifacts;
  j["created"] = created;
  j["tool_version"] = tool_version;
  return j;
}

Manifest Manifest::from_json(const nlohmann::json& j) {
  Manifest m;
  m.run_id = j.at("run_id").get<std::string>();
  m.config_hash = j.value("config_hash", "");
  m.seed = j.at("seed").get<uint64_t>();
  m.config_text = j.at("config").get<std::string>();
  m.artifacts = j.at("artifacts").get<std::vector<std::string>>();
  m.created = j.value("created", "");
  m.tool_version = j.value("tool_version", "");
  return m;
}

void write_manifest(const Manifest& m, const std::string& path) {
  Manifest out = m;
  if (out.created.empty()) {
    char buf[64];
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    out.created = buf;
  }
  if (out.tool_version.empty()) {
    out.tool_version = kToolVersion;
  }
  std::ofstream f(path);
  if (!f) {
    throw DataError("cannot open manifest for writing: " + path);
  }
  f << out.to_json().dump(2) << "\n";
}

Manifest read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    throw DataError("cannot open manifest: " + path);
  }
  nlohmann::json j;
  f >> j;
  return Manifest::from_json(j);
}

void write_checkpoint(const Checkpoint& ck, const std::string& path) {
  nlohmann::json hdr;
  hdr["step"] = ck.step;
  hdr["root_seed"] = ck.root_seed;
  hdr["dim"] = ck.params.dim();
  nlohmann::json slices = nlohmann::json::array();
  for (const LayerSlice& s : ck.params.layer_offsets) {
    slices.push_back({s.begin, s.end});
  }
  hdr["layer_offsets"] = slices;
  hdr["adam_step"] = ck.opt_state.step;
  hdr["has_adam"] = !ck.opt_state.m.empty();
  const std::string htext = hdr.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw DataError("cannot open checkpoint for writing: " + path);
  }
  const uint64_t hlen = htext.size();
  f.write(reinterpret_cast<const char*>(&hlen), 8);
  f.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  auto dump = [&f](const std::vector<double>& v) {
    f.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
  };
  dump(ck.params.values);
  if (!ck.opt_state.m.empty()) {
    dump(ck.opt_state.m);
    dump(ck.opt_state.v);
  }
  if (!f) {
    throw DataError("failed writing checkpoint: " + path);
  }
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw DataError("cannot open checkpoint: " + path);
  }
  uint64_t hlen = 0;
  f.read(reinterpret_cast<char*>(&hlen), 8);
  if (!f || hlen > (1u << 20)) {
    throw DataError("corrupt checkpoint header: " + path);
  }
  std::string htext(hlen, '\0');
  f.read(htext.data(), static_cast<std::streamsize>(hlen));
  if (!f) {
    throw DataError("truncated checkpoint header: " + path);
  }
  const nlohmann::json hdr = nlohmann::json::parse(htext);

  Checkpoint ck;
  ck.step = hdr.at("step").get<int64_t>();
  ck.root_seed = hdr.at("root_seed").get<uint64_t>();
  const size_t dim = hdr.at("dim").get<size_t>();
  for (const auto& s : hdr.at("layer_offsets")) {
    ck.params.layer_offsets.push_back(
        LayerSlice{s.at(0).get<size_t>(), s.at(1).get<size_t>()});
  }
  auto slurp = [&f, &path](std::vector<double>& v, size_t n) {
    v.resize(n);
    f.read(reinterpret_cast<char*>(v.data()),
           static_cast<std::streamsize>(n * sizeof(double)));
    if (!f) {
      throw DataError("truncated checkpoint payload: " + path);
    }
  };
  slurp(ck.params.values, dim);
  if (hdr.at("has_adam").get<bool>()) {
    slurp(ck.opt_state.m, dim);
    slurp(ck.opt_state.v, dim);
    ck.opt_state.step = hdr.at("adam_step").get<int64_t>();
  }
  return ck;
}

bool json_schema_check(const nlohmann::json& doc, const nlohmann::json& schema,
                       std::string* err) {
  auto fail = [err](const std::string& msg) {
    if (err) {
      *err = msg;
    }
    return false;
  };
  if (schema.contains("type")) {
    const std::string t = schema["type"].get<std::string>();
    const bool ok = (t == "object" && doc.is_object()) ||
                    (t == "array" && doc.is_array()) ||
                    (t == "string" && doc.is_string()) ||
                    (t == "number" && doc.is_number()) ||
                    (t == "integer" && doc.is_number_integer()) ||
                    (t == "boolean" && doc.is_boolean());
    if (!ok) {
      return fail("expected type " + t + ", got " + std::string(doc.type_name()));
    }
  }
  if (schema.contains("required")) {
    for (const auto& k : schema["required"]) {
      if (!doc.contains(k.get<std::string>())) {
        return fail("missing required key: " + k.get<std::string>());
      }
    }
  }
  if (schema.contains("properties") && doc.is_object()) {
    for (const auto& [k, sub] : schema["properties"].items()) {
      if (doc.contains(k)) {
        if (!json_schema_check(doc[k], sub, err)) {
          if (err) {
            *err = "." + k + ": " + *err;
          }
          return false;
        }
      }
    }
  }
  if (schema.contains("items") && doc.is_array()) {
    for (size_t i = 0; i < doc.size(); ++i) {
      if (!json_schema_check(doc[i], schema["items"], err)) {
        if (err) {
          *err = "[" + std::to_string(i) + "]: " + *err;
        }
        return false;
      }
    }
  }
  return true;
}

}  // namespace fraclab
