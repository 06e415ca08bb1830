#pragma once

#include <filesystem>
#include <fstream>
#include <string>

namespace benchdelta::cli::detail {

/// Creates parent directories; throws UsageError when the file cannot be opened.
std::ofstream open_output(const std::filesystem::path& path);

/// Full-precision rendering for machine-readable files; "NA" for non-finite.
std::string full(double v);

}  // namespace benchdelta::cli::detail
