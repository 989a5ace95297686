#include "cheom/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#ifndef CHEOM_VERSION
#define CHEOM_VERSION "0.0.0"
#endif

namespace cheom {

const char* software_version() { return CHEOM_VERSION; }

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_table(const std::vector<std::string>& header, const std::vector<std::vector<double>>& columns) {
  if (header.size() != columns.size()) throw std::invalid_argument("csv_table: header/column count mismatch");
  const std::size_t rows = columns.empty() ? 0 : columns[0].size();
  for (const auto& c : columns)
    if (c.size() != rows) throw std::invalid_argument("csv_table: ragged columns");
  std::string out;
  for (std::size_t c = 0; c < header.size(); ++c) out += (c ? "," : "") + header[c];
  out += '\n';
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) out += ',';
      out += format_double(columns[c][r]);
    }
    out += '\n';
  }
  return out;
}

void write_text_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    os << content;
    if (!os) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, p);
}

nlohmann::json make_manifest(const ScenarioConfig& cfg, const ManifestExtras& extra) {
  nlohmann::json m;
  m["subcommand"] = extra.subcommand;
  m["config"] = cfg.to_json();
  m["master_seed"] = cfg.master_seed;
  m["overrides"] = extra.overrides;
  m["time_unit"] = "1/" + cfg.unit_frequency;
  m["conventions"] = {
      {"theta", cfg.theta},
      {"photon_number", "tr rho^{(e,e)} / g^2 - theta (theta = 0: normal order)"},
      {"heterodyne_sign", "J dt = sqrt(2 kappa) <a^dagger> dt + dZ, dZ = (dW1 + i dW2)/sqrt(2)"},
      {"homodyne_current", "J dt = sqrt(2 kappa) <a + a^dagger> dt + dW"},
      {"integrator", to_string(cfg.integrator)}};
  m["software_version"] = software_version();
  m["wall_time_s"] = extra.wall_time_s;
  m["files"] = extra.files;
  return m;
}

}  // namespace cheom
