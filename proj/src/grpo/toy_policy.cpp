#include "mags/grpo/toy_policy.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mags/core/errors.hpp"

namespace mags::grpo {

ToyPolicy::ToyPolicy(int vocab, int length, double temperature)
    : vocab_(vocab), length_(length), temperature_(temperature) {
  if (vocab < 2 || vocab > kMaxVocab) throw ConfigError("toy vocabulary must be in [2, 64]", "vocab");
  if (length < 1 || length > kMaxLength) throw ConfigError("toy sequence length must be in [1, 8]", "length");
  if (!(temperature > 0)) throw ConfigError("temperature must be positive", "temperature");
  logits_.assign(static_cast<std::size_t>(vocab) * static_cast<std::size_t>(length), 0.0);
}

ToyPolicy ToyPolicy::random(int vocab, int length, std::uint64_t seed, double scale, double temperature) {
  ToyPolicy p(vocab, length, temperature);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, scale);
  for (auto& z : p.logits_) z = noise(rng);
  return p;
}

std::vector<double> ToyPolicy::probabilities(int position) const {
  std::vector<double> p(static_cast<std::size_t>(vocab_));
  double peak = -INFINITY;
  for (int v = 0; v < vocab_; ++v) peak = std::max(peak, logit(position, v) / temperature_);
  double total = 0;
  for (int v = 0; v < vocab_; ++v) {
    p[static_cast<std::size_t>(v)] = std::exp(logit(position, v) / temperature_ - peak);
    total += p[static_cast<std::size_t>(v)];
  }
  for (auto& x : p) x /= total;
  return p;
}

double ToyPolicy::log_prob(int position, int token) const {
  double peak = -INFINITY;
  for (int v = 0; v < vocab_; ++v) peak = std::max(peak, logit(position, v) / temperature_);
  double total = 0;
  for (int v = 0; v < vocab_; ++v) total += std::exp(logit(position, v) / temperature_ - peak);
  return logit(position, token) / temperature_ - peak - std::log(total);
}

double toy_reward(const std::vector<int>& sequence) {
  double r = 0;
  for (std::size_t t = 0; t < sequence.size(); ++t) {
    r += static_cast<double>((sequence[t] * 7 + static_cast<int>(t) * 3) % 11) / 10.0;
  }
  return sequence.empty() ? 0.0 : r / static_cast<double>(sequence.size());
}

ToyRollouts sample_toy_rollouts(const ToyPolicy& current, const GradCheckSpec& spec) {
  if (spec.group_size < 2 || spec.group_size > 16) throw ConfigError("group size must be in [2, 16]", "group_size");
  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> noise(0.0, 1.0);

  ToyRollouts r{current, current, {}, {}, {}};
  for (auto& z : r.old_policy.logits()) z += spec.old_shift * noise(rng);
  for (auto& z : r.ref_policy.logits()) z += spec.ref_shift * noise(rng);

  for (int i = 0; i < spec.group_size; ++i) {
    std::vector<int> seq(static_cast<std::size_t>(current.length()));
    for (int t = 0; t < current.length(); ++t) {
      const auto p = r.old_policy.probabilities(t);
      std::discrete_distribution<int> pick(p.begin(), p.end());
      seq[static_cast<std::size_t>(t)] = pick(rng);
    }
    r.rewards.push_back(spec.equal_rewards ? 1.0 : toy_reward(seq));
    r.sequences.push_back(std::move(seq));
  }
  r.advantages = compute_advantages(r.rewards, spec.eps_std);
  return r;
}

GroupBatch toy_group_batch(const ToyPolicy& current, const ToyRollouts& rollouts) {
  GroupBatch batch;
  batch.input_id = "toy";
  for (std::size_t i = 0; i < rollouts.sequences.size(); ++i) {
    const auto& seq = rollouts.sequences[i];
    TokenLogProbs lp;
    for (std::size_t t = 0; t < seq.size(); ++t) {
      const int pos = static_cast<int>(t);
      lp.tokens.push_back(seq[t]);
      lp.logp_new.push_back(current.log_prob(pos, seq[t]));
      lp.logp_old.push_back(rollouts.old_policy.log_prob(pos, seq[t]));
      lp.logp_ref.push_back(rollouts.ref_policy.log_prob(pos, seq[t]));
    }
    batch.members.push_back({std::move(lp), rollouts.rewards[i], rollouts.advantages[i]});
  }
  return batch;
}

double toy_loss(const ToyPolicy& current, const ToyRollouts& rollouts, double eps, double beta) {
  return grpo_loss(toy_group_batch(current, rollouts), eps, beta).loss;
}

std::vector<double> toy_loss_gradient(const ToyPolicy& current, const ToyRollouts& rollouts, double eps,
                                      double beta) {
  const int vocab = current.vocab();
  std::vector<double> grad(current.logits().size(), 0.0);
  const double g = static_cast<double>(rollouts.sequences.size());
  for (std::size_t i = 0; i < rollouts.sequences.size(); ++i) {
    const auto& seq = rollouts.sequences[i];
    const double adv = rollouts.advantages[i];
    const double scale = 1.0 / (g * static_cast<double>(seq.size()));
    for (std::size_t t = 0; t < seq.size(); ++t) {
      const int pos = static_cast<int>(t);
      const int tok = seq[t];
      const double logp_new = current.log_prob(pos, tok);
      const double ratio = std::exp(logp_new - rollouts.old_policy.log_prob(pos, tok));

      // d(surrogate)/d(logp_new): the unclipped product is live unless the
      // clipped branch is strictly smaller, in which case it is constant.
      const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
      const double d_surr = ratio * adv <= clipped * adv ? ratio * adv : 0.0;
      const double r_ref = std::exp(rollouts.ref_policy.log_prob(pos, tok) - logp_new);
      const double d_loss = -d_surr + beta * (1.0 - r_ref);

      // d(logp_new)/d(z_v) = (1[v == tok] - p_v) / temperature.
      const auto p = current.probabilities(pos);
      for (int v = 0; v < vocab; ++v) {
        const double dlogp = ((v == tok ? 1.0 : 0.0) - p[static_cast<std::size_t>(v)]) / current.temperature();
        grad[static_cast<std::size_t>(pos) * static_cast<std::size_t>(vocab) + static_cast<std::size_t>(v)] +=
            scale * d_loss * dlogp;
      }
    }
  }
  return grad;
}

GradCheckResult toy_policy_grad_check(const ToyPolicy& policy, const GradCheckSpec& spec) {
  const auto rollouts = sample_toy_rollouts(policy, spec);
  GradCheckResult out;
  out.loss = toy_loss(policy, rollouts, spec.clip_eps, spec.kl_beta);
  out.analytic = toy_loss_gradient(policy, rollouts, spec.clip_eps, spec.kl_beta);
  if (spec.flip_analytic_sign) {
    for (auto& g : out.analytic) g = -g;
  }

  ToyPolicy probe = policy;
  out.numeric.resize(out.analytic.size());
  for (std::size_t j = 0; j < probe.logits().size(); ++j) {
    const double saved = probe.logits()[j];
    probe.logits()[j] = saved + spec.fd_step;
    const double up = toy_loss(probe, rollouts, spec.clip_eps, spec.kl_beta);
    probe.logits()[j] = saved - spec.fd_step;
    const double down = toy_loss(probe, rollouts, spec.clip_eps, spec.kl_beta);
    probe.logits()[j] = saved;
    out.numeric[j] = (up - down) / (2.0 * spec.fd_step);

    const double a = out.analytic[j];
    const double f = out.numeric[j];
    const double denom = std::max({std::abs(a), std::abs(f), kRelErrorFloor});
    out.max_rel_error = std::max(out.max_rel_error, std::abs(a - f) / denom);
  }
  return out;
}

}  // namespace mags::grpo
