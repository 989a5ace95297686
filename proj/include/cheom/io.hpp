#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "cheom/config.hpp"

namespace cheom {

std::string format_double(double v);  // 17 significant digits

// Columns are stored column-major: columns[c][row]. First header entry names the first column.
std::string csv_table(const std::vector<std::string>& header, const std::vector<std::vector<double>>& columns);

// temp file + rename in the same directory
void write_text_atomic(const std::string& path, const std::string& content);

struct ManifestExtras {
  std::string subcommand;
  nlohmann::json overrides = nlohmann::json::object();
  double wall_time_s = 0.0;
  std::vector<std::string> files;
};

nlohmann::json make_manifest(const ScenarioConfig& cfg, const ManifestExtras& extra);

const char* software_version();

}  // namespace cheom
