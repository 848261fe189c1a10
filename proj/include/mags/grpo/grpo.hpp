#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mags/core/stage_config.hpp"

namespace mags::grpo {

// Per-token log-probabilities of one sampled output under the current, the
// sampling-time and the reference policy. All four sequences are aligned.
struct TokenLogProbs {
  std::vector<std::int64_t> tokens;
  std::vector<double> logp_new;
  std::vector<double> logp_old;
  std::vector<double> logp_ref;

  std::size_t size() const { return tokens.size(); }
  // Throws ConfigError on empty or misaligned sequences, or positive values.
  void validate() const;
};

struct GroupMember {
  std::optional<TokenLogProbs> logprobs;
  double reward = 0;
  std::optional<double> advantage;  // written only by assign_advantages
};

struct GroupBatch {
  std::string input_id;
  std::vector<GroupMember> members;

  std::size_t group_size() const { return members.size(); }
};

// (r_i - mean) / sample std. Groups whose sample std falls below eps_std get
// all-zero advantages; mean_only skips the division. Needs >= 2 rewards.
std::vector<double> compute_advantages(std::span<const double> rewards, double eps_std,
                                       AdvantageNorm norm = AdvantageNorm::std_dev);
void assign_advantages(GroupBatch& batch, double eps_std, AdvantageNorm norm = AdvantageNorm::std_dev);

// min(s * A, clip(s, 1 - eps, 1 + eps) * A). eps may be +infinity.
double surrogate_term(double ratio, double advantage, double eps);

// k3 estimator r - log r - 1 with r = pi_ref / pi_new on the sampled token.
double kl_term(double logp_new, double logp_ref);

struct TokenTerm {
  double ratio = 1;
  double surrogate = 0;
  double kl = 0;
  double loss = 0;  // -surrogate + beta * kl
};

struct LossResult {
  double loss = 0;
  double mean_surrogate = 0;
  double mean_kl = 0;
  std::vector<std::vector<TokenTerm>> per_token;
};

// Token-mean within each member, member-mean over the group; minimizing
// `loss` maximizes the clipped objective minus beta * KL.
LossResult grpo_loss(const GroupBatch& batch, double eps, double beta);

nlohmann::json to_json(const GroupBatch& batch);
GroupBatch group_from_json(const nlohmann::json& j);
// One group object per line.
std::vector<GroupBatch> load_group_batches(const std::filesystem::path& path);
void save_group_batches(const std::filesystem::path& path, const std::vector<GroupBatch>& batches);

}  // namespace mags::grpo
