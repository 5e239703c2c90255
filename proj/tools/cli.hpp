#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geomdiff/kernels.hpp"
#include "geomdiff/schedule.hpp"

namespace geomdiff::cli {

enum ExitCode : int { ok = 0, failure = 1, config_error = 2, numeric_failure = 3, check_failure = 4 };

/// Full command line, argv[0] included.
int dispatch(int argc, const char* const* argv);
int dispatch(const std::vector<std::string>& args);

/// SHA-1 of "blob <size>\0<content>", as git computes object ids.
std::string git_blob_sha1(const std::string& content);

nlohmann::json kernel_to_json(const KernelSpec& k);
KernelSpec kernel_from_json(const nlohmann::json& j);
nlohmann::json mean_to_json(const MeanSpec& m);
MeanSpec mean_from_json(const nlohmann::json& j);
nlohmann::json schedule_to_json(const DiffusionSchedule& s);
DiffusionSchedule schedule_from_json(const nlohmann::json& j);

/// Minimal SVG line chart of (x, y) pairs.
std::string svg_line_chart(const std::vector<double>& x, const std::vector<double>& y, const std::string& title,
                           bool log_y);

/// Lists every regular file under `dir` (relative paths) missing from, or hashed
/// differently in, dir/manifest.json. Empty when the manifest is complete.
std::vector<std::string> manifest_problems(const std::string& dir);

}  // namespace geomdiff::cli
