#include "mags/core/types.hpp"

namespace mags {

std::string_view to_string(TaskType t) {
  return t == TaskType::counting ? "counting" : "other";
}

std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::easy:
      return "easy";
    case Difficulty::medium:
      return "medium";
    case Difficulty::hard:
      return "hard";
  }
  return "easy";
}

std::optional<TaskType> parse_task_type(std::string_view s) {
  if (s == "counting") return TaskType::counting;
  if (s == "other") return TaskType::other;
  return std::nullopt;
}

std::optional<Difficulty> parse_difficulty(std::string_view s) {
  if (s == "easy") return Difficulty::easy;
  if (s == "medium") return Difficulty::medium;
  if (s == "hard") return Difficulty::hard;
  return std::nullopt;
}

}  // namespace mags
