#include "mags/reward/reward_engine.hpp"

#include <algorithm>
#include <cmath>

#include "mags/core/errors.hpp"
#include "mags/text/lex_stats.hpp"
#include "mags/text/strings.hpp"

namespace mags::reward {

using parse::StructuredResponse;
using parse::TagFamily;

FormatRewards format_rewards(const StructuredResponse& resp) {
  FormatRewards f;
  f.afmt = resp.present(TagFamily::answer) ? 1.0 : 0.0;
  f.tfmt = resp.present(TagFamily::think) ? 0.5 : 0.0;
  f.rfmt = resp.present(TagFamily::rethink) ? 0.5 : 0.0;
  return f;
}

bool zoom_format_indicator(const StructuredResponse& resp) {
  return resp.present(TagFamily::zoom) && resp.zoom_nested_in_think && !resp.zoom_boxes_raw.empty();
}

double zoom_format_value(bool i_zfmt, std::size_t n_u, double f_d) {
  if (!i_zfmt || n_u < kMinUniqueWords) return 0.0;
  if (f_d < kDiversityThreshold) return 0.1;
  const double saturation = std::min(1.0, std::log(static_cast<double>(n_u) + 1.0) / std::log(20.0));
  return 0.5 + 0.5 * saturation;
}

double zoom_format_reward(const StructuredResponse& resp) {
  const auto stats = text::lex_stats(resp.think_reasoning());
  return zoom_format_value(zoom_format_indicator(resp), stats.unique_words, stats.diversity);
}

AnswerReward answer_reward(const Sample& sample, const StructuredResponse& resp, AnswerJudge* judge) {
  AnswerReward out;
  if (!resp.present(TagFamily::answer)) return out;
  const std::string answer = text::to_lower(text::trim(*resp.answer_text));
  const std::string truth = text::to_lower(text::trim(sample.ground_truth));
  if (answer == truth) {
    out.r_ans = 1.0;
    return out;
  }
  if (judge == nullptr) return out;
  double score = 0;
  try {
    score = judge->score(sample.question, sample.ground_truth, std::string(text::trim(*resp.answer_text)));
  } catch (const Error& e) {
    throw RewardError(std::string("answer judge failed: ") + e.what(), sample.id);
  }
  out.gpt_score = score;
  out.r_ans = score >= kJudgePassThreshold ? 0.5 : 0.0;
  return out;
}

ZoomScaling zoom_scaling(bool i_zfmt, std::size_t n_u, double f_d) {
  ZoomScaling s;
  if (!i_zfmt) return s;
  const bool substantive = n_u >= kMinUniqueWords;
  const bool diverse = f_d >= kDiversityThreshold;
  s.T = substantive ? (diverse ? 1.0 : 0.1) : 0.0;
  s.S = 0.1 + 0.9 * ((substantive && diverse) ? 1.0 : 0.0);
  return s;
}

ZoomAccuracy zoom_accuracy_reward(const Sample& sample, const StructuredResponse& resp, std::size_t k,
                                  std::size_t n, const StageConfig& config) {
  if (k > n) throw ConfigError("valid box count " + std::to_string(k) + " exceeds total " + std::to_string(n));
  const auto stats = text::lex_stats(resp.think_reasoning());
  const auto scaling = zoom_scaling(zoom_format_indicator(resp), stats.unique_words, stats.diversity);

  ZoomAccuracy out{0.0, scaling.T, scaling.S};
  const bool recall = config.zoom_reward_variant == ZoomRewardVariant::recall_counting && sample.is_counting();
  if (recall && !sample.gt_count) {
    throw ConfigError("counting sample \"" + sample.id + "\" has no gt_count; cannot score recall");
  }
  if (n == 0) return out;

  const double precision = static_cast<double>(k) / static_cast<double>(n);
  double value = 0;
  if (config.zoom_reward_variant == ZoomRewardVariant::precision) {
    value = scaling.T * precision;
  } else if (recall) {
    const auto truth = *sample.gt_count;
    // Zero-object questions reward proposing no valid box at all.
    const double coverage = truth == 0 ? (k == 0 ? 1.0 : 0.0) : static_cast<double>(k) / static_cast<double>(truth);
    const double penalty = kInvalidBoxPenalty * static_cast<double>(n - k);
    value = scaling.S * std::max(0.0, std::min(1.0, coverage) - penalty);
  } else {
    value = scaling.S * precision;
  }
  out.r_zoom = std::clamp(value, 0.0, 1.0);
  return out;
}

double rethink_volume_value(bool i_afmt, std::size_t n_u_rethink) {
  if (n_u_rethink < kMinUniqueWords) return 0.0;
  const double gate = 0.5 + 0.5 * (i_afmt ? 1.0 : 0.0);
  return gate * std::min(1.0, 0.2 * std::sqrt(static_cast<double>(n_u_rethink)));
}

double rethink_volume_reward(const StructuredResponse& resp) {
  const auto n_u = resp.rethink_text ? text::lex_stats(*resp.rethink_text).unique_words : 0;
  return rethink_volume_value(resp.present(TagFamily::answer), n_u);
}

double weighted_total(const RewardBreakdown& b, const StageConfig& c) {
  const auto& w = c.fmt_weights;
  const double fmt = w.zfmt * b.r_zfmt + w.afmt * b.r_afmt + w.tfmt * b.r_tfmt + w.rfmt * b.r_rfmt;
  return fmt + c.lambda_ans * b.r_ans + c.lambda_zoom * b.r_zoom + c.lambda_revo * b.r_revo;
}

RewardBreakdown total_reward(const Sample& sample, const StructuredResponse& resp, std::size_t k, std::size_t n,
                             const StageConfig& config, AnswerJudge* judge) {
  RewardBreakdown b;
  const auto fmt = format_rewards(resp);
  b.r_afmt = fmt.afmt;
  b.r_tfmt = fmt.tfmt;
  b.r_rfmt = fmt.rfmt;
  b.i_afmt = resp.present(TagFamily::answer);
  b.i_zfmt = zoom_format_indicator(resp);

  const auto think_stats = text::lex_stats(resp.think_reasoning());
  b.n_u = think_stats.unique_words;
  b.f_d = think_stats.diversity;
  b.r_zfmt = zoom_format_value(b.i_zfmt, b.n_u, b.f_d);
  b.r_fmt_unweighted = b.r_afmt + b.r_tfmt + b.r_rfmt + b.r_zfmt;

  const auto ans = answer_reward(sample, resp, judge);
  b.r_ans = ans.r_ans;
  b.gpt_score = ans.gpt_score;

  b.k = k;
  b.n = n;
  const auto zoom = zoom_accuracy_reward(sample, resp, k, n, config);
  b.r_zoom = zoom.r_zoom;
  b.T = zoom.T;
  b.S = zoom.S;

  b.n_u_rethink = resp.rethink_text ? text::lex_stats(*resp.rethink_text).unique_words : 0;
  b.r_revo = rethink_volume_value(b.i_afmt, b.n_u_rethink);

  b.r_total = weighted_total(b, config);
  return b;
}

nlohmann::json to_json(const RewardBreakdown& b) {
  nlohmann::json j = {{"r_afmt", b.r_afmt},
                      {"r_tfmt", b.r_tfmt},
                      {"r_rfmt", b.r_rfmt},
                      {"r_zfmt", b.r_zfmt},
                      {"r_fmt_unweighted", b.r_fmt_unweighted},
                      {"r_ans", b.r_ans},
                      {"r_zoom", b.r_zoom},
                      {"r_revo", b.r_revo},
                      {"i_afmt", b.i_afmt},
                      {"i_zfmt", b.i_zfmt},
                      {"N_u", b.n_u},
                      {"f_d", b.f_d},
                      {"N_u_rethink", b.n_u_rethink},
                      {"k", b.k},
                      {"n", b.n},
                      {"T", b.T},
                      {"S", b.S},
                      {"gpt_score", nullptr},
                      {"r_total", b.r_total}};
  if (b.gpt_score) j["gpt_score"] = *b.gpt_score;
  return j;
}

RewardBreakdown breakdown_from_json(const nlohmann::json& j) {
  RewardBreakdown b;
  b.r_afmt = j.at("r_afmt").get<double>();
  b.r_tfmt = j.at("r_tfmt").get<double>();
  b.r_rfmt = j.at("r_rfmt").get<double>();
  b.r_zfmt = j.at("r_zfmt").get<double>();
  b.r_fmt_unweighted = j.at("r_fmt_unweighted").get<double>();
  b.r_ans = j.at("r_ans").get<double>();
  b.r_zoom = j.at("r_zoom").get<double>();
  b.r_revo = j.at("r_revo").get<double>();
  b.i_afmt = j.at("i_afmt").get<bool>();
  b.i_zfmt = j.at("i_zfmt").get<bool>();
  b.n_u = j.at("N_u").get<std::size_t>();
  b.f_d = j.at("f_d").get<double>();
  b.n_u_rethink = j.at("N_u_rethink").get<std::size_t>();
  b.k = j.at("k").get<std::size_t>();
  b.n = j.at("n").get<std::size_t>();
  b.T = j.at("T").get<double>();
  b.S = j.at("S").get<double>();
  if (!j.at("gpt_score").is_null()) b.gpt_score = j.at("gpt_score").get<double>();
  b.r_total = j.at("r_total").get<double>();
  return b;
}

}  // namespace mags::reward
