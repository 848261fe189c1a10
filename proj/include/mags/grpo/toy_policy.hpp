#pragma once

#include <cstdint>
#include <vector>

#include "mags/grpo/grpo.hpp"

namespace mags::grpo {

// Desk-scale stand-in for the policy network: an independent softmax over a
// small vocabulary at each of `length` positions.
class ToyPolicy {
 public:
  static constexpr int kMaxVocab = 64;
  static constexpr int kMaxLength = 8;

  ToyPolicy(int vocab, int length, double temperature = 1.0);
  static ToyPolicy random(int vocab, int length, std::uint64_t seed, double scale = 1.0, double temperature = 1.0);

  int vocab() const { return vocab_; }
  int length() const { return length_; }
  double temperature() const { return temperature_; }

  double& logit(int position, int token) { return logits_[index(position, token)]; }
  double logit(int position, int token) const { return logits_[index(position, token)]; }
  std::vector<double>& logits() { return logits_; }
  const std::vector<double>& logits() const { return logits_; }

  std::vector<double> probabilities(int position) const;
  double log_prob(int position, int token) const;

 private:
  std::size_t index(int position, int token) const {
    return static_cast<std::size_t>(position) * static_cast<std::size_t>(vocab_) + static_cast<std::size_t>(token);
  }

  int vocab_;
  int length_;
  double temperature_;
  std::vector<double> logits_;
};

struct GradCheckSpec {
  int group_size = 16;
  std::uint64_t seed = 0;
  double clip_eps = 0.2;
  double kl_beta = 0.04;
  double eps_std = 1e-4;
  double fd_step = 1e-5;
  // Logit noise separating the current policy from pi_old and pi_ref, so that
  // clipping and the KL term are both exercised.
  double old_shift = 0.3;
  double ref_shift = 0.3;
  bool equal_rewards = false;
  // Negative control: negate the analytic gradient.
  bool flip_analytic_sign = false;
};

// Everything the loss needs besides the current logits: sequences sampled
// from the frozen old policy, their rewards and advantages, and the
// reference policy.
struct ToyRollouts {
  ToyPolicy old_policy;
  ToyPolicy ref_policy;
  std::vector<std::vector<int>> sequences;
  std::vector<double> rewards;
  std::vector<double> advantages;
};

ToyRollouts sample_toy_rollouts(const ToyPolicy& current, const GradCheckSpec& spec);

// Deterministic synthetic reward of a sampled sequence, in [0, 1].
double toy_reward(const std::vector<int>& sequence);

GroupBatch toy_group_batch(const ToyPolicy& current, const ToyRollouts& rollouts);
double toy_loss(const ToyPolicy& current, const ToyRollouts& rollouts, double eps, double beta);

// d loss / d logits, laid out like ToyPolicy::logits().
std::vector<double> toy_loss_gradient(const ToyPolicy& current, const ToyRollouts& rollouts, double eps, double beta);

struct GradCheckResult {
  double max_rel_error = 0;
  double loss = 0;
  std::vector<double> analytic;
  std::vector<double> numeric;
};

// Relative errors use max(|analytic|, |numeric|, kRelErrorFloor) as the denominator.
inline constexpr double kRelErrorFloor = 1e-8;
inline constexpr double kGradCheckTolerance = 1e-4;

GradCheckResult toy_policy_grad_check(const ToyPolicy& policy, const GradCheckSpec& spec);

}  // namespace mags::grpo
