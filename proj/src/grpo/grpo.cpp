#include "mags/grpo/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mags/core/errors.hpp"

namespace mags::grpo {

using nlohmann::json;

void TokenLogProbs::validate() const {
  if (tokens.empty()) throw ConfigError("token sequence is empty");
  if (logp_new.size() != tokens.size() || logp_old.size() != tokens.size() || logp_ref.size() != tokens.size()) {
    throw ConfigError("log-probability sequences are not aligned with " + std::to_string(tokens.size()) + " tokens");
  }
  auto non_positive = [](double v) { return v <= 0.0; };
  if (!std::all_of(logp_new.begin(), logp_new.end(), non_positive) ||
      !std::all_of(logp_old.begin(), logp_old.end(), non_positive) ||
      !std::all_of(logp_ref.begin(), logp_ref.end(), non_positive)) {
    throw ConfigError("log-probabilities must be <= 0");
  }
}

std::vector<double> compute_advantages(std::span<const double> rewards, double eps_std, AdvantageNorm norm) {
  const std::size_t g = rewards.size();
  if (g < 2) throw ConfigError("group needs at least 2 rewards, got " + std::to_string(g));
  double mean = 0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(g);
  double ss = 0;
  for (double r : rewards) ss += (r - mean) * (r - mean);
  const double sd = std::sqrt(ss / static_cast<double>(g - 1));

  std::vector<double> adv(g, 0.0);
  if (sd < eps_std) return adv;
  for (std::size_t i = 0; i < g; ++i) {
    adv[i] = norm == AdvantageNorm::std_dev ? (rewards[i] - mean) / sd : rewards[i] - mean;
  }
  return adv;
}

void assign_advantages(GroupBatch& batch, double eps_std, AdvantageNorm norm) {
  std::vector<double> rewards;
  rewards.reserve(batch.members.size());
  for (const auto& m : batch.members) rewards.push_back(m.reward);
  const auto adv = compute_advantages(rewards, eps_std, norm);
  for (std::size_t i = 0; i < adv.size(); ++i) batch.members[i].advantage = adv[i];
}

double surrogate_term(double ratio, double advantage, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return std::min(ratio * advantage, clipped * advantage);
}

double kl_term(double logp_new, double logp_ref) {
  const double log_r = logp_ref - logp_new;
  return std::exp(log_r) - log_r - 1.0;
}

LossResult grpo_loss(const GroupBatch& batch, double eps, double beta) {
  if (batch.members.empty()) throw ConfigError("group " + batch.input_id + " has no members");
  LossResult out;
  out.per_token.reserve(batch.members.size());
  for (const auto& m : batch.members) {
    if (!m.logprobs) throw ConfigError("group " + batch.input_id + " member lacks log-probabilities");
    if (!m.advantage) throw ConfigError("group " + batch.input_id + " advantages not computed");
    const auto& lp = *m.logprobs;
    lp.validate();

    std::vector<TokenTerm> terms(lp.size());
    double member_loss = 0;
    double member_surr = 0;
    double member_kl = 0;
    for (std::size_t t = 0; t < lp.size(); ++t) {
      auto& term = terms[t];
      term.ratio = std::exp(lp.logp_new[t] - lp.logp_old[t]);
      term.surrogate = surrogate_term(term.ratio, *m.advantage, eps);
      term.kl = kl_term(lp.logp_new[t], lp.logp_ref[t]);
      term.loss = -term.surrogate + beta * term.kl;
      member_loss += term.loss;
      member_surr += term.surrogate;
      member_kl += term.kl;
    }
    const double len = static_cast<double>(lp.size());
    out.loss += member_loss / len;
    out.mean_surrogate += member_surr / len;
    out.mean_kl += member_kl / len;
    out.per_token.push_back(std::move(terms));
  }
  const double g = static_cast<double>(batch.members.size());
  out.loss /= g;
  out.mean_surrogate /= g;
  out.mean_kl /= g;
  return out;
}

json to_json(const GroupBatch& batch) {
  json members = json::array();
  for (const auto& m : batch.members) {
    json jm = {{"reward", m.reward}};
    if (m.logprobs) {
      jm["tokens"] = m.logprobs->tokens;
      jm["logp_new"] = m.logprobs->logp_new;
      jm["logp_old"] = m.logprobs->logp_old;
      jm["logp_ref"] = m.logprobs->logp_ref;
    }
    if (m.advantage) jm["advantage"] = *m.advantage;
    members.push_back(std::move(jm));
  }
  return {{"input_id", batch.input_id}, {"group_size", batch.members.size()}, {"members", std::move(members)}};
}

GroupBatch group_from_json(const json& j) {
  GroupBatch b;
  b.input_id = j.at("input_id").get<std::string>();
  for (const auto& jm : j.at("members")) {
    GroupMember m;
    m.reward = jm.at("reward").get<double>();
    if (jm.contains("tokens")) {
      TokenLogProbs lp;
      lp.tokens = jm.at("tokens").get<std::vector<std::int64_t>>();
      lp.logp_new = jm.at("logp_new").get<std::vector<double>>();
      lp.logp_old = jm.at("logp_old").get<std::vector<double>>();
      lp.logp_ref = jm.at("logp_ref").get<std::vector<double>>();
      m.logprobs = std::move(lp);
    }
    if (jm.contains("advantage")) m.advantage = jm.at("advantage").get<double>();
    b.members.push_back(std::move(m));
  }
  return b;
}

std::vector<GroupBatch> load_group_batches(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open group batch file " + path.string());
  std::vector<GroupBatch> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(group_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError(e.what(), line_no);
    }
  }
  return out;
}

void save_group_batches(const std::filesystem::path& path, const std::vector<GroupBatch>& batches) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& b : batches) out << to_json(b).dump() << '\n';
}

}  // namespace mags::grpo
