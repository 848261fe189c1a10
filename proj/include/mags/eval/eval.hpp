#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mags/core/errors.hpp"
#include "mags/core/raster_image.hpp"
#include "mags/core/types.hpp"
#include "mags/eval/judge.hpp"

namespace mags::eval {

inline constexpr std::string_view kRefusal = "Refusal";

struct ExtractedAnswer {
  bool refusal = false;
  std::string text;  // empty for a refusal

  static ExtractedAnswer refused() { return {true, {}}; }
  static ExtractedAnswer answer(std::string t) { return {false, std::move(t)}; }
  bool operator==(const ExtractedAnswer&) const = default;
};

// The extractor's reply, trimmed, first line only; exactly "Refusal" maps to
// the refusal variant. Throws ConfigError for a judge of another role and
// TransportError when the judge stays unreachable.
ExtractedAnswer extract_answer(const std::string& question, const std::string& raw_response, JudgeHandle& judge);

struct GptScore {
  double score = 0;     // always one of 0, 0.25, 0.5, 0.75, 1
  bool snapped = false; // the judge's value was off the lattice
  bool error = false;   // unparseable twice; score forced to 0
  std::optional<std::string> raw_reply;
};

double snap_to_lattice(double v);

GptScore gpt_accuracy(const std::string& question, const std::string& ground_truth, const ExtractedAnswer& extracted,
                      JudgeHandle& judge);

bool inclusion_accuracy(const std::string& ground_truth, const ExtractedAnswer& extracted);

struct StratificationError : Error {
  using Error::Error;
};

// Finds zoom_score in a reply such as {"reasoning": "...", "zoom_score": 7} or
// the unquoted { reasoning: ..., zoom_score: 7 }. Throws StratificationError
// when absent or not an integer.
long long parse_zoom_score(const std::string& reply);

// 1-3 easy, 4-7 medium, 8-10 hard; anything else is a StratificationError.
Difficulty bucket_for_score(long long zoom_score);

Difficulty stratify(const Sample& sample, const RasterImage& image, JudgeHandle& judge);

struct StratifyOutcome {
  std::vector<Sample> samples;  // difficulty filled, input order kept
  std::vector<std::pair<std::string, std::string>> excluded;  // (sample id, reason)
};

// Judges every sample; failures are logged and excluded, the batch continues.
StratifyOutcome stratify_all(const std::vector<Sample>& samples, JudgeHandle& judge,
                             const std::function<RasterImage(const Sample&)>& load_image, int parallelism);

struct EvalRecord {
  std::string sample_id;
  std::string dataset;
  std::string raw_answer;
  ExtractedAnswer extracted;
  double gpt_score = 0;
  bool gpt_error = false;
  bool inclusion = false;
  Difficulty bucket = Difficulty::easy;

  bool operator==(const EvalRecord&) const = default;
};

// Extraction, rubric score and inclusion for one sample. The sample must
// already carry a difficulty bucket (ConfigError otherwise).
EvalRecord evaluate_response(const Sample& sample, const std::string& raw_response, JudgeHandle& extractor,
                             JudgeHandle& rubric);

nlohmann::json to_json(const EvalRecord& r);
EvalRecord record_from_json(const nlohmann::json& j);
std::vector<EvalRecord> load_records(const std::filesystem::path& path);
void save_records(const std::filesystem::path& path, const std::vector<EvalRecord>& records);

struct ReportRow {
  std::string dataset;
  Difficulty bucket = Difficulty::easy;
  std::size_t count = 0;
  double gpt_accuracy = 0;        // percent, two decimals
  double inclusion_accuracy = 0;  // percent, two decimals
};

struct Report {
  std::vector<ReportRow> rows;  // datasets sorted, then easy, medium, hard
  std::vector<std::string> notes;
};

inline constexpr std::string_view kDefaultDataset = "all";

// Throws ConfigError on an empty record list.
Report aggregate(const std::vector<EvalRecord>& records);

double round2(double v);
nlohmann::json to_json(const Report& report);
std::string format_table(const Report& report);

}  // namespace mags::eval
