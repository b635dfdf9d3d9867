#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "rpg/critic.hpp"
#include "rpg/policy.hpp"
#include "rpg/rng.hpp"

using namespace rpg;

namespace {

Trajectory one_shot(double reward_row, double reward_col) {
  Trajectory t;
  StepRecord s;
  s.reward_row = reward_row;
  s.reward_col = reward_col;
  t.steps.push_back(s);
  return t;
}

// test-local recursion oracle, independent of the implementation
std::vector<double> gae_oracle(const std::vector<double>& rewards, const std::vector<double>& v,
                               double gamma, double lambda) {
  std::vector<double> adv(rewards.size());
  double next = 0.0;
  for (size_t k = rewards.size(); k-- > 0;) {
    const double v_next = k + 1 < rewards.size() ? v[k + 1] : 0.0;
    const double delta = rewards[k] + gamma * v_next - v[k];
    next = delta + gamma * lambda * next;
    adv[k] = next;
  }
  return adv;
}

}  // namespace

TEST_SUITE("agents") {

TEST_CASE("log-prob of a uniform two-action policy is log 0.5") {
  Tape t;
  std::vector<Value> logits = lift_logits(t, std::vector<double>{0.0, 0.0}, true);
  CHECK(policy_log_prob(logits, 0).val() == doctest::Approx(std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("log-prob with logits (ln 3, 0) is log 0.75") {
  Tape t;
  std::vector<Value> logits = lift_logits(t, std::vector<double>{std::log(3.0), 0.0}, true);
  CHECK(policy_log_prob(logits, 0).val() == doctest::Approx(std::log(0.75)).epsilon(1e-12));
}

TEST_CASE("log-prob gradient at the chosen logit is 1 - pi(a)") {
  const std::vector<double> raw{0.5, -0.3, 0.9};
  auto build = [](Tape&, std::span<const Value> leaves) {
    return policy_log_prob(leaves, 1);
  };
  FiniteDiffReport r = finite_diff_check(build, raw, 1e-5);
  const std::vector<double> probs = softmax<double>(raw);
  CHECK(r.analytic[1] == doctest::Approx(1.0 - probs[1]).epsilon(1e-10));
  CHECK(r.analytic[0] == doctest::Approx(-probs[0]).epsilon(1e-10));
  CHECK(r.max_rel_err < 1e-6);
}

TEST_CASE("probabilities sum to one from the log-prob path") {
  Tape t;
  std::vector<Value> logits = lift_logits(t, std::vector<double>{2.2, -0.4, 0.1, 1.3}, true);
  double sum = 0.0;
  for (int a = 0; a < 4; ++a) sum += std::exp(policy_log_prob(logits, a).val());
  CHECK(std::abs(sum - 1.0) < 1e-12);
}

TEST_CASE("softmax is translation invariant") {
  const std::vector<double> raw{0.7, -1.1, 0.2};
  std::vector<double> shifted = raw;
  for (double& x : shifted) x += 41.5;
  const std::vector<double> a = softmax<double>(raw);
  const std::vector<double> b = softmax<double>(shifted);
  for (size_t k = 0; k < a.size(); ++k) CHECK(std::abs(a[k] - b[k]) < 1e-10);
  CHECK(std::abs(entropy<double>(raw) - entropy<double>(shifted)) < 1e-10);
}

TEST_CASE("entropy values") {
  // uniform over three actions
  CHECK(entropy<double>(std::vector<double>{0.0, 0.0, 0.0}) ==
        doctest::Approx(std::log(3.0)).epsilon(1e-12));
  // near-pure policy approaches zero
  CHECK(entropy<double>(std::vector<double>{40.0, 0.0}) == doctest::Approx(0.0).epsilon(1e-9));
  // logits (1, 0): direct formula -sum p log p
  const std::vector<double> p = softmax<double>(std::vector<double>{1.0, 0.0});
  const double expect = -(p[0] * std::log(p[0]) + p[1] * std::log(p[1]));
  CHECK(expect == doctest::Approx(0.5822).epsilon(1e-4));
  CHECK(entropy<double>(std::vector<double>{1.0, 0.0}) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("entropy gradient matches finite differences") {
  auto build = [](Tape&, std::span<const Value> leaves) { return entropy_bonus(leaves); };
  const std::vector<double> raw{0.9, -0.2, 0.4};
  FiniteDiffReport r = finite_diff_check(build, raw, 1e-5);
  CHECK(r.max_rel_err < 1e-6);
}

TEST_CASE("gae: single step advantage is the reward when V=0") {
  CriticParams c = make_critic("a|b", 1, 1.0);
  const std::vector<double> adv = gae_advantages(one_shot(0.7, 0.7), c, Seat::row, 0.95, 0.95);
  REQUIRE(adv.size() == 1);
  CHECK(adv[0] == doctest::Approx(0.7));
}

TEST_CASE("gae: gamma=0 collapses to r - V") {
  CriticParams c = make_critic("a|b", 3, 1.0);
  c.value_row = {0.2, 0.4, 0.6};
  Trajectory t;
  for (double r : {1.0, 2.0, 3.0}) {
    StepRecord s;
    s.reward_row = r;
    t.steps.push_back(s);
  }
  const std::vector<double> adv = gae_advantages(t, c, Seat::row, 0.0, 0.95);
  CHECK(adv[0] == doctest::Approx(0.8));
  CHECK(adv[1] == doctest::Approx(1.6));
  CHECK(adv[2] == doctest::Approx(2.4));
}

TEST_CASE("gae horizon-3 recursion against the hand oracle") {
  CriticParams c = make_critic("a|b", 3, 1.0);
  Trajectory t;
  for (int k = 0; k < 3; ++k) {
    StepRecord s;
    s.reward_row = 1.0;
    t.steps.push_back(s);
  }
  const std::vector<double> adv = gae_advantages(t, c, Seat::row, 0.95, 0.95);
  const std::vector<double> expect = gae_oracle({1, 1, 1}, {0, 0, 0}, 0.95, 0.95);
  CHECK(adv[0] == doctest::Approx(1.0 + 0.9025 + 0.81450625).epsilon(1e-12));
  for (size_t k = 0; k < 3; ++k) CHECK(adv[k] == doctest::Approx(expect[k]).epsilon(1e-12));
}

TEST_CASE("gae with lambda=1 and V=0 equals discounted reward-to-go") {
  CriticParams c = make_critic("a|b", 4, 1.0);
  Trajectory t;
  Rng rng = Rng::seeded(3);
  for (int k = 0; k < 4; ++k) {
    StepRecord s;
    s.reward_row = rng.next_double() * 2.0 - 1.0;
    t.steps.push_back(s);
  }
  const std::vector<double> adv = gae_advantages(t, c, Seat::row, 0.9, 1.0);
  const std::vector<double> togo = discounted_returns(t, 0, 0.9);
  for (size_t k = 0; k < 4; ++k) CHECK(adv[k] == doctest::Approx(togo[k]).epsilon(1e-12));
}

TEST_CASE("critic update: exact critic is a fixed point") {
  CriticParams c = make_critic("a|b", 1, 1.0);
  c.value_row = {0.5};
  c.value_col = {0.5};
  std::vector<Trajectory> batch{one_shot(0.5, 0.5), one_shot(0.5, 0.5)};
  const double loss = critic_update(c, batch, 0.95, 0.5);
  CHECK(loss == doctest::Approx(0.0));
  CHECK(c.value_row[0] == doctest::Approx(0.5));
}

TEST_CASE("critic update: single sample, lr 1, coefficient 0.5 moves V to 0.5") {
  CriticParams c = make_critic("a|b", 1, 1.0);
  std::vector<Trajectory> batch{one_shot(1.0, 1.0)};
  critic_update(c, batch, 0.95, 0.5);
  CHECK(c.value_row[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(c.value_col[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("critic update rejects an empty batch") {
  CriticParams c = make_critic("a|b", 1, 1.0);
  std::vector<Trajectory> batch;
  CHECK_THROWS_WITH_AS((void)critic_update(c, batch, 0.95, 0.5),
                       doctest::Contains("no data for pairing"), std::runtime_error);
}

TEST_CASE("critic update decreases value loss at small lr") {
  Rng rng = Rng::seeded(17);
  for (int trial = 0; trial < 10; ++trial) {
    CriticParams c = make_critic("a|b", 2, 1e-3);
    c.value_row = {rng.next_normal(), rng.next_normal()};
    c.value_col = c.value_row;
    std::vector<Trajectory> batch;
    for (int k = 0; k < 8; ++k) {
      Trajectory t;
      for (int j = 0; j < 2; ++j) {
        StepRecord s;
        s.reward_row = rng.next_normal();
        s.reward_col = s.reward_row;
        t.steps.push_back(s);
      }
      batch.push_back(t);
    }
    CriticParams before = c;
    const double loss0 = critic_update(c, batch, 0.9, 0.5);
    // measure the post-update loss without moving further
    CriticParams after = c;
    after.lr = 0.0;
    const double loss1 = critic_update(after, batch, 0.9, 0.5);
    CHECK(loss1 <= loss0 + 1e-12);
    (void)before;
  }
}

TEST_CASE("advantage normalization pools across batches jointly") {
  AdvantageBatch b1, b2;
  b1.advantages = {{1.0}, {-1.0}};
  b2.advantages = {{3.0}, {-3.0}};
  std::vector<AdvantageBatch*> group{&b1, &b2};
  normalize_advantages(group);
  // pooled std over (1, -1, 3, -3) is sqrt(5)
  const double s = std::sqrt(5.0);
  CHECK(b1.norm_std == doctest::Approx(s).epsilon(1e-12));
  CHECK(b1.advantages[0][0] == doctest::Approx(1.0 / (s + 1e-8)).epsilon(1e-9));
  CHECK(b2.advantages[0][0] == doctest::Approx(3.0 / (s + 1e-8)).epsilon(1e-9));

  // pooled mean and std over everything: 0 and 1
  double mean = 0, var = 0;
  for (const AdvantageBatch* b : group)
    for (const auto& tr : b->advantages)
      for (double a : tr) mean += a;
  mean /= 4;
  for (const AdvantageBatch* b : group)
    for (const auto& tr : b->advantages)
      for (double a : tr) var += (a - mean) * (a - mean);
  CHECK(std::abs(mean) < 1e-6);
  CHECK(std::abs(std::sqrt(var / 4) - 1.0) < 1e-6);
}

TEST_CASE("advantage normalization handles degenerate batches") {
  AdvantageBatch constant;
  constant.advantages = {{2.0}, {2.0}, {2.0}};
  std::vector<AdvantageBatch*> g1{&constant};
  normalize_advantages(g1);
  for (const auto& tr : constant.advantages) CHECK(tr[0] == doctest::Approx(0.0));

  AdvantageBatch single;
  single.advantages = {{7.0}};
  std::vector<AdvantageBatch*> g2{&single};
  normalize_advantages(g2);
  CHECK(single.advantages[0][0] == doctest::Approx(0.0));
}

TEST_CASE("checkpoint round trip") {
  PolicyCheckpoint ckpt;
  ckpt.agent_id = "adversary";
  ckpt.role = Role::base;
  ckpt.trainable = true;
  ckpt.seats.push_back({Seat::col, {0.125, -2.5, 3.75}});
  const std::string path = "/tmp/rpg_test_ckpt.txt";
  save_checkpoint(path, ckpt);
  PolicyCheckpoint back = load_checkpoint(path);
  CHECK(back.agent_id == "adversary");
  CHECK(back.role == Role::base);
  REQUIRE(back.seat_logits(Seat::col) != nullptr);
  CHECK(*back.seat_logits(Seat::col) == std::vector<double>{0.125, -2.5, 3.75});
  CHECK(back.seat_logits(Seat::row) == nullptr);
  std::remove(path.c_str());

  CHECK_THROWS_AS((void)load_checkpoint("/tmp/does_not_exist_rpg.ckpt"), std::runtime_error);
}

}  // TEST_SUITE("agents")
