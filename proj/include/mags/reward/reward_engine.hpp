#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "json.hpp"
#include "mags/core/stage_config.hpp"
#include "mags/core/types.hpp"
#include "mags/parse/response_parser.hpp"

namespace mags::reward {

// Semantic similarity score in [0, 1] for (question, ground truth, answer).
// Implementations must be safe to call concurrently and throw TransportError
// when the judge cannot be reached.
class AnswerJudge {
 public:
  virtual ~AnswerJudge() = default;
  virtual double score(const std::string& question, const std::string& ground_truth, const std::string& answer) = 0;
};

inline constexpr double kJudgePassThreshold = 0.7;
inline constexpr double kDiversityThreshold = 0.4;
inline constexpr std::size_t kMinUniqueWords = 5;
inline constexpr double kInvalidBoxPenalty = 0.05;

struct RewardBreakdown {
  double r_afmt = 0;
  double r_tfmt = 0;
  double r_rfmt = 0;
  double r_zfmt = 0;
  double r_fmt_unweighted = 0;
  double r_ans = 0;
  double r_zoom = 0;
  double r_revo = 0;

  bool i_afmt = false;
  bool i_zfmt = false;
  std::size_t n_u = 0;  // unique words of the round-1 reasoning
  double f_d = 0;       // lexical diversity of the round-1 reasoning
  std::size_t n_u_rethink = 0;
  std::size_t k = 0;
  std::size_t n = 0;
  double T = 0;
  double S = 0;
  std::optional<double> gpt_score;

  double r_total = 0;
};

struct FormatRewards {
  double afmt = 0;  // 1 when the answer pair is in order
  double tfmt = 0;  // 0.5 when the think pair is in order
  double rfmt = 0;  // 0.5 when the rethink pair is in order
};

FormatRewards format_rewards(const parse::StructuredResponse& resp);

// I_zfmt: a zoom block in order, nested inside think, holding >= 1 box tuple.
bool zoom_format_indicator(const parse::StructuredResponse& resp);

// The zoom-format expression on already-computed inputs. The diversity split
// is exclusive: f_d < 0.4 earns the flat 0.1, f_d >= 0.4 the log term.
double zoom_format_value(bool i_zfmt, std::size_t n_u, double f_d);
double zoom_format_reward(const parse::StructuredResponse& resp);

struct AnswerReward {
  double r_ans = 0;
  std::optional<double> gpt_score;  // set only when the judge was consulted
};

// Exact match (trimmed, lowercased) earns 1 without consulting the judge. A
// missing or disordered answer pair earns 0, also without the judge. Without
// a judge only exact matches score. Judge failures surface as RewardError.
AnswerReward answer_reward(const Sample& sample, const parse::StructuredResponse& resp, AnswerJudge* judge);

struct ZoomScaling {
  double T = 0;
  double S = 0;
};

ZoomScaling zoom_scaling(bool i_zfmt, std::size_t n_u, double f_d);

struct ZoomAccuracy {
  double r_zoom = 0;
  double T = 0;
  double S = 0;
};

// k and n must come from the zoom agent's validation of the same response.
ZoomAccuracy zoom_accuracy_reward(const Sample& sample, const parse::StructuredResponse& resp, std::size_t k,
                                  std::size_t n, const StageConfig& config);

double rethink_volume_value(bool i_afmt, std::size_t n_u_rethink);
double rethink_volume_reward(const parse::StructuredResponse& resp);

RewardBreakdown total_reward(const Sample& sample, const parse::StructuredResponse& resp, std::size_t k,
                             std::size_t n, const StageConfig& config, AnswerJudge* judge);

double weighted_total(const RewardBreakdown& b, const StageConfig& config);

nlohmann::json to_json(const RewardBreakdown& b);
RewardBreakdown breakdown_from_json(const nlohmann::json& j);

}  // namespace mags::reward
