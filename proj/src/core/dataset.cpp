#include "mags/core/dataset.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "mags/core/errors.hpp"
#include "mags/text/strings.hpp"

namespace mags {

using nlohmann::json;

std::optional<std::int64_t> parse_count_literal(const std::string& text) {
  const auto trimmed = text::trim(text);
  if (trimmed.empty()) return std::nullopt;
  std::int64_t value = 0;
  const auto* first = trimmed.data();
  const auto* last = trimmed.data() + trimmed.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || value < 0) return std::nullopt;
  return value;
}

namespace {

std::string required_string(const json& record, const char* key) {
  auto it = record.find(key);
  if (it == record.end()) throw DataError(std::string("missing field \"") + key + "\"");
  if (!it->is_string()) throw DataError(std::string("field \"") + key + "\" must be a string");
  return it->get<std::string>();
}

}  // namespace

Sample sample_from_json(const json& record) {
  if (!record.is_object()) throw DataError("record must be an object");
  Sample s;
  s.id = required_string(record, "id");
  s.image_path = required_string(record, "image_path");
  s.question = required_string(record, "question");
  s.ground_truth = required_string(record, "ground_truth");
  const auto task = required_string(record, "task_type");
  const auto parsed_task = parse_task_type(task);
  if (!parsed_task) throw DataError("unknown task_type \"" + task + "\"");
  s.task_type = *parsed_task;

  if (auto it = record.find("gt_count"); it != record.end() && !it->is_null()) {
    if (!it->is_number_integer() || it->get<std::int64_t>() < 0) {
      throw DataError("gt_count must be a non-negative integer");
    }
    s.gt_count = it->get<std::int64_t>();
  }
  if (auto it = record.find("difficulty"); it != record.end() && !it->is_null()) {
    if (!it->is_string()) throw DataError("difficulty must be a string");
    s.difficulty = parse_difficulty(it->get<std::string>());
    if (!s.difficulty) throw DataError("unknown difficulty \"" + it->get<std::string>() + "\"");
  }
  if (auto it = record.find("dataset"); it != record.end() && !it->is_null()) {
    if (!it->is_string()) throw DataError("dataset must be a string");
    s.dataset = it->get<std::string>();
  }

  if (s.is_counting()) {
    const auto count = parse_count_literal(s.ground_truth);
    if (!count) {
      throw DataError("counting sample \"" + s.id + "\" has non-integer ground_truth \"" + s.ground_truth + "\"");
    }
    if (s.gt_count && *s.gt_count != *count) {
      throw DataError("counting sample \"" + s.id + "\" gt_count " + std::to_string(*s.gt_count) +
                      " disagrees with ground_truth \"" + s.ground_truth + "\"");
    }
    s.gt_count = count;
  }
  return s;
}

json sample_to_json(const Sample& s) {
  json j = {{"id", s.id},
            {"image_path", s.image_path},
            {"question", s.question},
            {"ground_truth", s.ground_truth},
            {"task_type", std::string(to_string(s.task_type))}};
  if (s.gt_count) j["gt_count"] = *s.gt_count;
  if (s.difficulty) j["difficulty"] = std::string(to_string(*s.difficulty));
  if (!s.dataset.empty()) j["dataset"] = s.dataset;
  return j;
}

std::vector<Sample> parse_samples(const std::string& text) {
  std::vector<Sample> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    try {
      out.push_back(sample_from_json(record));
    } catch (const DataError& e) {
      throw DataError(e.what(), line_no);
    }
  }
  return out;
}

std::vector<Sample> load_samples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_samples(buf.str());
}

std::string serialize_samples(const std::vector<Sample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    out += sample_to_json(s).dump();
    out += '\n';
  }
  return out;
}

void save_samples(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << serialize_samples(samples);
}

std::filesystem::path resolve_image_path(const Sample& sample, const std::filesystem::path& dataset_dir) {
  std::filesystem::path p(sample.image_path);
  if (p.is_absolute() || dataset_dir.empty()) return p;
  return dataset_dir / p;
}

}  // namespace mags
