#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "paretohqd/core.hpp"
#include "paretohqd/geometry.hpp"

namespace paretohqd {

/// Reads line-delimited records `{"id","prompt","response","rewards"?}`.
/// Blank lines are skipped. Errors name the 1-based line number.
Dataset ingest_dataset(std::istream& in, std::size_t objective_count);
Dataset ingest_dataset(std::istream& in,
                       std::vector<std::string> objective_names);
Dataset read_dataset_file(const std::filesystem::path& path,
                          std::size_t objective_count);
Dataset read_dataset_file(const std::filesystem::path& path,
                          std::vector<std::string> objective_names);

/// One record, keys ordered id, prompt, response, rewards, then unknown
/// fields in their original order.
nlohmann::ordered_json example_to_json(const ScoredExample& ex);
ScoredExample example_from_json(const nlohmann::ordered_json& j,
                                std::size_t objective_count);

void write_dataset(std::ostream& out, const Dataset& d);
void write_dataset_file(const std::filesystem::path& path, const Dataset& d);

nlohmann::ordered_json bounds_to_json(const RewardBounds& b);
RewardBounds bounds_from_json(const nlohmann::ordered_json& j);

/// Writes `content` to `path` through a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace paretohqd
