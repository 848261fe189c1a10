#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "doctest.h"
#include "mags/core/errors.hpp"
#include "mags/grpo/grpo.hpp"
#include "mags/grpo/toy_policy.hpp"
#include "support.hpp"

using namespace mags;
using namespace mags::grpo;

TEST_CASE("advantages") {
  const std::vector<double> flat{1, 1, 1, 1};
  for (double a : compute_advantages(flat, 1e-4)) CHECK(a == 0.0);
  const std::vector<double> two{1, 0};
  const auto a = compute_advantages(two, 1e-4);
  CHECK(a[0] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(a[1] == doctest::Approx(-std::sqrt(0.5)).epsilon(1e-12));
  const std::vector<double> one{3};
  CHECK_THROWS_AS(compute_advantages(one, 1e-4), ConfigError);
  // Spread below the floor: zeros, not (r - mean) / eps.
  const std::vector<double> tiny{1, 1 + 1e-6, 1};
  for (double v : compute_advantages(tiny, 1e-4)) CHECK(v == 0.0);
  const std::vector<double> r{1, 2, 6};
  const auto m = compute_advantages(r, 1e-4, AdvantageNorm::mean_only);
  CHECK(m[0] == doctest::Approx(-2.0));
  CHECK(m[2] == doctest::Approx(3.0));
}

TEST_CASE("property: advantages centre and scale") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> g(2, 16);
  std::normal_distribution<double> n(0, 2);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> r(static_cast<std::size_t>(g(rng)));
    for (auto& x : r) x = n(rng);
    const auto a = compute_advantages(r, 1e-4);
    CHECK(std::fabs(std::accumulate(a.begin(), a.end(), 0.0)) < 1e-10);
    double ss = 0;
    for (double x : a) ss += x * x;
    CHECK(ss / static_cast<double>(a.size() - 1) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("surrogate") {
  CHECK(surrogate_term(1.5, 1, 0.2) == doctest::Approx(1.2));
  CHECK(surrogate_term(0.5, -1, 0.2) == doctest::Approx(-0.8));
  CHECK(surrogate_term(1.0, 0.37, 0.2) == 0.37);
  CHECK(surrogate_term(1.0, -2.5, 0.05) == -2.5);
  CHECK(surrogate_term(3.0, 1.0, std::numeric_limits<double>::infinity()) == 3.0);
}

TEST_CASE("property: surrogate pessimism") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> s(0.01, 3), a(-3, 3), e(0.01, 0.5);
  for (int i = 0; i < 20000; ++i) {
    const double ratio = s(rng), adv = a(rng), eps = e(rng);
    const double v = surrogate_term(ratio, adv, eps);
    const double clipped = std::clamp(ratio, 1 - eps, 1 + eps) * adv;
    CHECK(v <= ratio * adv);
    CHECK(v <= clipped);
  }
}

TEST_CASE("kl") {
  CHECK(kl_term(-1.3, -1.3) == 0.0);
  CHECK(kl_term(-2.0, -2.0 + std::log(2.0)) == doctest::Approx(2 - std::log(2.0) - 1).epsilon(1e-12));
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> lp(-20, 0);
  for (int i = 0; i < 20000; ++i) CHECK(kl_term(lp(rng), lp(rng)) >= 0.0);
}

namespace {

GroupMember member(std::vector<double> lnew, std::vector<double> lold, std::vector<double> lref, double reward) {
  TokenLogProbs t;
  for (std::size_t i = 0; i < lnew.size(); ++i) t.tokens.push_back(static_cast<std::int64_t>(i));
  t.logp_new = std::move(lnew);
  t.logp_old = std::move(lold);
  t.logp_ref = std::move(lref);
  return {t, reward, std::nullopt};
}

}  // namespace

TEST_CASE("loss examples") {
  GroupBatch b{"x", {member({-1, -2}, {-1, -2}, {-1, -2}, 1.0), member({-0.5}, {-0.5}, {-0.5}, 0.0),
                     member({-3, -1, -2}, {-3, -1, -2}, {-3, -1, -2}, 0.5)}};
  assign_advantages(b, 1e-4);
  CHECK(grpo_loss(b, 0.2, 0.0).loss == doctest::Approx(0.0).epsilon(1e-12));

  GroupBatch flat{"y", {member({-1}, {-1.2}, {-1}, 1.0), member({-2}, {-1}, {-2}, 1.0)}};
  assign_advantages(flat, 1e-4);
  CHECK(grpo_loss(flat, 0.2, 0.04).loss == 0.0);
}

TEST_CASE("loss sanity vector") {
  // Two members, advantages fixed by hand.
  GroupBatch b{"z", {member({-1.0, -0.5}, {-1.1, -0.2}, {-0.9, -0.6}, 0), member({-2.0}, {-1.5}, {-2.3}, 0)}};
  b.members[0].advantage = 0.8;
  b.members[1].advantage = -0.8;
  const double eps = 0.2, beta = 0.04;
  auto token = [&](double ln, double lo, double lr, double a) {
    const double s = std::exp(ln - lo);
    const double sc = std::min(std::max(s, 1 - eps), 1 + eps);
    const double surr = std::min(s * a, sc * a);
    const double r = std::exp(lr - ln);
    return -surr + beta * (r - std::log(r) - 1);
  };
  const double m0 = (token(-1.0, -1.1, -0.9, 0.8) + token(-0.5, -0.2, -0.6, 0.8)) / 2;
  const double m1 = token(-2.0, -1.5, -2.3, -0.8);
  const auto res = grpo_loss(b, eps, beta);
  CHECK(std::fabs(res.loss - (m0 + m1) / 2) < 1e-10);
  CHECK(res.per_token.size() == 2);
  CHECK(res.per_token[0].size() == 2);
}

TEST_CASE("loss errors") {
  GroupBatch b{"e", {member({-1}, {-1}, {-1}, 0), member({-1}, {-1}, {-1}, 1)}};
  CHECK_THROWS_AS(grpo_loss(b, 0.2, 0.04), ConfigError);  // no advantages yet
  assign_advantages(b, 1e-4);
  b.members[0].logprobs->logp_old.push_back(-1);
  CHECK_THROWS_AS(grpo_loss(b, 0.2, 0.04), ConfigError);
  b.members[0].logprobs.reset();
  CHECK_THROWS_AS(grpo_loss(b, 0.2, 0.04), ConfigError);
}

TEST_CASE("property: loss is invariant to member order") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> lp(-4, -0.01), rw(0, 4);
  std::uniform_int_distribution<int> len(1, 6), gs(2, 8);
  for (int trial = 0; trial < 300; ++trial) {
    GroupBatch b{"p", {}};
    const int g = gs(rng);
    for (int i = 0; i < g; ++i) {
      std::vector<double> a, o, r;
      for (int t = len(rng); t > 0; --t) {
        a.push_back(lp(rng));
        o.push_back(lp(rng));
        r.push_back(lp(rng));
      }
      b.members.push_back(member(a, o, r, rw(rng)));
    }
    assign_advantages(b, 1e-4);
    const double l1 = grpo_loss(b, 0.2, 0.04).loss;
    std::shuffle(b.members.begin(), b.members.end(), rng);
    assign_advantages(b, 1e-4);
    CHECK(grpo_loss(b, 0.2, 0.04).loss == doctest::Approx(l1).epsilon(1e-12));
  }
}

TEST_CASE("group batch json round trip") {
  GroupBatch b{"s1", {member({-1, -2}, {-1, -2.5}, {-1.5, -2}, 1.0), member({-0.5}, {-0.5}, {-0.5}, 0.0)}};
  assign_advantages(b, 1e-4);
  b.members.push_back({std::nullopt, 0.3, std::nullopt});
  testsupport::TempDir dir;
  save_group_batches(dir / "g.jsonl", {b, b});
  const auto back = load_group_batches(dir / "g.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(to_json(back[1]) == to_json(b));
  CHECK(back[0].members[0].advantage == b.members[0].advantage);
  CHECK_FALSE(back[0].members[2].logprobs.has_value());
}

TEST_CASE("toy policy softmax") {
  const auto p = ToyPolicy::random(64, 8, 5, 3.0, 0.7);
  for (int pos = 0; pos < 8; ++pos) {
    const auto probs = p.probabilities(pos);
    CHECK(std::fabs(std::accumulate(probs.begin(), probs.end(), 0.0) - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(ToyPolicy(65, 2), ConfigError);
  CHECK_THROWS_AS(ToyPolicy(4, 9), ConfigError);
  CHECK_THROWS_AS(ToyPolicy(1, 2), ConfigError);
}

TEST_CASE("toy gradient check") {
  GradCheckSpec spec;
  for (std::uint64_t seed : {1u, 2u}) {
    spec.seed = seed;
    const auto r = toy_policy_grad_check(ToyPolicy::random(16, 4, seed), spec);
    CHECK(r.max_rel_error < kGradCheckTolerance);
  }
  spec.kl_beta = 0;
  spec.equal_rewards = true;
  const auto zero = toy_policy_grad_check(ToyPolicy::random(16, 4, 3), spec);
  CHECK(zero.max_rel_error == 0.0);
  for (double g : zero.analytic) CHECK(g == 0.0);

  GradCheckSpec flipped;
  flipped.flip_analytic_sign = true;
  CHECK(toy_policy_grad_check(ToyPolicy::random(16, 4, 4), flipped).max_rel_error > kGradCheckTolerance);
}

TEST_CASE("unclipped gradient equals vanilla policy gradient") {
  GradCheckSpec spec;
  spec.seed = 8;
  spec.group_size = 6;
  const auto policy = ToyPolicy::random(10, 5, spec.seed);
  const auto rollouts = sample_toy_rollouts(policy, spec);
  const double inf = std::numeric_limits<double>::infinity();
  const auto grad = toy_loss_gradient(policy, rollouts, inf, 0.0);

  // d/dz of -(1/GL) sum s A with s = pi/pi_old, computed directly.
  std::vector<double> expected(policy.logits().size(), 0.0);
  const double scale = 1.0 / (static_cast<double>(rollouts.sequences.size()) * policy.length());
  for (std::size_t i = 0; i < rollouts.sequences.size(); ++i) {
    for (int t = 0; t < policy.length(); ++t) {
      const int tok = rollouts.sequences[i][static_cast<std::size_t>(t)];
      const double s = std::exp(policy.log_prob(t, tok) - rollouts.old_policy.log_prob(t, tok));
      const auto p = policy.probabilities(t);
      for (int v = 0; v < policy.vocab(); ++v) {
        const double dlogp = ((v == tok ? 1.0 : 0.0) - p[static_cast<std::size_t>(v)]) / policy.temperature();
        expected[static_cast<std::size_t>(t * policy.vocab() + v)] += -scale * rollouts.advantages[i] * s * dlogp;
      }
    }
  }
  for (std::size_t j = 0; j < grad.size(); ++j) CHECK(std::fabs(grad[j] - expected[j]) < 1e-10);
}
