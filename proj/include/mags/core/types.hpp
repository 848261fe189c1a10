#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace mags {

// Pixel coordinates, origin top-left, exactly as the model wrote them.
// Validity is judged by the zoom agent, never here.
struct BoundingBox {
  double x1 = 0;
  double y1 = 0;
  double x2 = 0;
  double y2 = 0;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

enum class TaskType { counting, other };
enum class Difficulty { easy, medium, hard };

std::string_view to_string(TaskType t);
std::string_view to_string(Difficulty d);
std::optional<TaskType> parse_task_type(std::string_view s);
std::optional<Difficulty> parse_difficulty(std::string_view s);

struct Sample {
  std::string id;
  std::string image_path;
  std::string question;
  std::string ground_truth;
  TaskType task_type = TaskType::other;
  std::optional<std::int64_t> gt_count;
  std::optional<Difficulty> difficulty;
  // Benchmark the record belongs to ("VSR", "TallyQA", ...); used as the
  // row key when aggregating evaluation results.
  std::string dataset;

  bool is_counting() const { return task_type == TaskType::counting; }

  friend bool operator==(const Sample&, const Sample&) = default;
};

}  // namespace mags
