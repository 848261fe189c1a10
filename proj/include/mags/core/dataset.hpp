#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mags/core/types.hpp"

namespace mags {

// Reads one JSON record per line: {id, image_path, question, ground_truth,
// task_type, gt_count?, difficulty?, dataset?}. Blank lines are skipped.
// Counting records get gt_count filled from ground_truth when absent; a
// non-integer ground truth or a gt_count that disagrees with it is a
// DataError carrying the 1-based line number.
std::vector<Sample> load_samples(const std::filesystem::path& path);
std::vector<Sample> parse_samples(const std::string& text);

Sample sample_from_json(const nlohmann::json& record);
nlohmann::json sample_to_json(const Sample& sample);

void save_samples(const std::filesystem::path& path, const std::vector<Sample>& samples);
std::string serialize_samples(const std::vector<Sample>& samples);

// Strict integer reading of a counting ground truth ("4", " 12 "); nullopt for
// anything else, including "4.0", "+4" and "four".
std::optional<std::int64_t> parse_count_literal(const std::string& text);

// Resolves a sample's image path against the directory of the dataset file.
std::filesystem::path resolve_image_path(const Sample& sample, const std::filesystem::path& dataset_dir);

}  // namespace mags
