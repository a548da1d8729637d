#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace andikit::cli {

using Json = nlohmann::json;

/// Writes to `path.tmp` and renames over `path`.
void write_atomic(const std::string& path, const std::string& content);

std::string sha256_file(const std::string& path);

/// Throws std::runtime_error when a required field of the report's type is
/// missing or has the wrong shape, or when the type is unknown.
void validate_report(const Json& report);

/// CSV files (name, content) for a report. Report types: erasure, noise,
/// correlation, evaluation, training, receptive_field.
std::vector<std::pair<std::string, std::string>> render_plotdata(const Json& report);

/// render_plotdata + write_atomic into `dir`; nothing is written on error.
std::vector<std::string> emit_plotdata(const Json& report, const std::string& dir);

}  // namespace andikit::cli
