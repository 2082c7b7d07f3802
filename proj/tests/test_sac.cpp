#include "torch_doctest.hpp"

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "scenerep/errors.hpp"
#include "scenerep/rl/sac.hpp"

using namespace scenerep;

namespace {

rl::SacConfig small() {
  rl::SacConfig c;
  c.latent = 8;
  c.hidden = 16;
  return c;
}

template <class M>
M make(const rl::SacConfig& c) {
  M m(c);
  m->to(torch::kFloat64);
  return m;
}

auto f64() { return torch::TensorOptions().dtype(torch::kFloat64); }

struct Nets {
  rl::SacConfig cfg = small();
  rl::Actor actor = make<rl::Actor>(cfg);
  rl::Critic q1 = make<rl::Critic>(cfg), q2 = make<rl::Critic>(cfg);
  rl::Critic q1t = make<rl::Critic>(cfg), q2t = make<rl::Critic>(cfg);
};

rl::CriticBatch random_batch(int64_t B, int64_t D) {
  rl::CriticBatch b;
  b.h = torch::randn({B, D}, f64());
  b.actions = torch::rand({B, 2}, f64()) * 2 - 1;
  b.rewards = torch::randint(-1, 2, {B}, f64());
  b.dones = (torch::rand({B}, f64()) < 0.3).to(torch::kFloat64);
  b.h_next = torch::randn({B, D}, f64());
  b.h_next_target = torch::randn({B, D}, f64());
  b.next_noise = torch::randn({B, 2}, f64());
  return b;
}

// log N(u; mean, std) - log(1 - tanh(u)^2), per dimension, summed.
double naive_log_prob(const std::vector<double>& u, const std::vector<double>& mean, const std::vector<double>& log_std) {
  double lp = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double s = std::exp(log_std[i]);
    const double z = (u[i] - mean[i]) / s;
    lp += -0.5 * z * z - std::log(s) - 0.5 * std::log(2.0 * M_PI);
    lp -= std::log(1.0 - std::tanh(u[i]) * std::tanh(u[i]));
  }
  return lp;
}

}  // namespace

TEST_CASE("squashed log-density matches quadrature of the Gaussian") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> m(-1.5, 1.5), ls(-1.0, 0.5), pos(-0.95, 0.95);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const std::vector<double> mean{m(rng), m(rng)}, log_std{ls(rng), ls(rng)}, a{pos(rng), pos(rng)};
    const auto u = torch::tensor({std::atanh(a[0]), std::atanh(a[1])}, f64());
    const double got = rl::squashed_log_prob(u, torch::tensor(mean, f64()), torch::tensor(log_std, f64())).item<double>();
    double ref = 0.0;
    for (int d = 0; d < 2; ++d) ref += oracle::squashed_log_density_quadrature(a[d], mean[d], std::exp(log_std[d]));
    worst = std::max(worst, std::abs(got - ref));
  }
  MESSAGE("worst log-density gap " << worst);
  CHECK(worst <= 1e-4);
}

TEST_CASE("squashed log-density stays finite for saturated actions") {
  const auto u = torch::tensor({30.0, -30.0}, f64());
  const auto lp = rl::squashed_log_prob(u, torch::zeros({2}, f64()), torch::zeros({2}, f64()));
  CHECK(std::isfinite(lp.item<double>()));
  // log(1 - tanh(u)^2) ~ log 4 - 2|u| for large |u|.
  const double expected = 2 * (-0.5 * 900 - 0.5 * std::log(2 * M_PI)) - 2 * (std::log(4.0) - 60.0);
  CHECK(lp.item<double>() == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("policy sampling") {
  torch::manual_seed(1);
  Nets n;
  const auto h = torch::randn({64, 8}, f64());
  SUBCASE("evaluation mode is tanh of the mean and repeatable") {
    const auto a = rl::sample_action(n.actor, h, {});
    CHECK_FALSE(a.log_prob.defined());
    CHECK(torch::equal(a.action, torch::tanh(n.actor(h).first)));
    CHECK(torch::equal(a.action, rl::sample_action(n.actor, h, {}).action));
  }
  SUBCASE("training mode is reparameterized and matches the naive density") {
    const auto noise = torch::randn({64, 2}, f64());
    const auto s = rl::sample_action(n.actor, h, noise);
    CHECK(s.action.abs().max().item<double>() < 1.0);
    auto [mean, log_std] = n.actor(h);
    for (int i = 0; i < 64; ++i) {
      std::vector<double> u, mu, ls;
      for (int d = 0; d < 2; ++d) {
        mu.push_back(mean[i][d].item<double>());
        ls.push_back(log_std[i][d].item<double>());
        u.push_back(mu.back() + std::exp(ls.back()) * noise[i][d].item<double>());
        CHECK(s.action[i][d].item<double>() == doctest::Approx(std::tanh(u.back())).epsilon(1e-12));
      }
      CHECK(s.log_prob[i].item<double>() == doctest::Approx(naive_log_prob(u, mu, ls)).epsilon(1e-9));
    }
  }
  SUBCASE("log-std is clamped") {
    auto [mean, log_std] = n.actor(1e4 * torch::randn({16, 8}, f64()));
    CHECK(log_std.min().item<double>() >= rl::kLogStdMin);
    CHECK(log_std.max().item<double>() <= rl::kLogStdMax);
  }
}

TEST_CASE("critic loss against a hand-computed target") {
  torch::manual_seed(2);
  Nets n;
  const double alpha = 0.3, gamma = 0.99;
  const auto b = random_batch(16, 8);
  const auto out = rl::critic_loss(n.q1, n.q2, n.q1t, n.q2t, n.actor, b, alpha, gamma);

  torch::NoGradGuard guard;
  auto [mean, log_std] = n.actor(b.h_next);
  double loss1 = 0.0, loss2 = 0.0;
  for (int i = 0; i < 16; ++i) {
    std::vector<double> u, mu, ls;
    for (int d = 0; d < 2; ++d) {
      mu.push_back(mean[i][d].item<double>());
      ls.push_back(log_std[i][d].item<double>());
      u.push_back(mu.back() + std::exp(ls.back()) * b.next_noise[i][d].item<double>());
    }
    const auto a = torch::tensor({std::tanh(u[0]), std::tanh(u[1])}, f64()).unsqueeze(0);
    const auto hb = b.h_next_target[i].unsqueeze(0);
    const double qn = std::min(n.q1t(hb, a).item<double>(), n.q2t(hb, a).item<double>());
    const double y = b.rewards[i].item<double>() +
                     gamma * (1.0 - b.dones[i].item<double>()) * (qn - alpha * naive_log_prob(u, mu, ls));
    CHECK(out.target[i].item<double>() == doctest::Approx(y).epsilon(1e-10));
    const auto h = b.h[i].unsqueeze(0), act = b.actions[i].unsqueeze(0);
    loss1 += std::pow(n.q1(h, act).item<double>() - y, 2);
    loss2 += std::pow(n.q2(h, act).item<double>() - y, 2);
  }
  CHECK(out.loss.item<double>() == doctest::Approx((loss1 + loss2) / 16).epsilon(1e-10));
}

TEST_CASE("terminal transitions do not bootstrap") {
  torch::manual_seed(3);
  Nets n;
  auto b = random_batch(8, 8);
  b.rewards.fill_(-1.0);
  b.dones.fill_(1.0);
  const auto out = rl::critic_loss(n.q1, n.q2, n.q1t, n.q2t, n.actor, b, 0.5, 0.99);
  CHECK(torch::equal(out.target, torch::full({8}, -1.0, f64())));
}

TEST_CASE("gradient routing of the SAC losses") {
  torch::manual_seed(4);
  Nets n;
  auto b = random_batch(16, 8);
  b.h = b.h.clone().requires_grad_(true);

  SUBCASE("critic loss reaches the latent and online critics only") {
    const auto out = rl::critic_loss(n.q1, n.q2, n.q1t, n.q2t, n.actor, b, 0.2, 0.99);
    CHECK_FALSE(out.target.requires_grad());
    out.loss.backward();
    CHECK(b.h.grad().defined());
    CHECK(b.h.grad().abs().sum().item<double>() > 0.0);
    for (auto& p : n.q1->parameters()) CHECK(p.grad().defined());
    for (auto& p : n.q2->parameters()) CHECK(p.grad().defined());
    for (auto& p : n.q1t->parameters()) CHECK_FALSE(p.grad().defined());
    for (auto& p : n.q2t->parameters()) CHECK_FALSE(p.grad().defined());
    for (auto& p : n.actor->parameters()) CHECK_FALSE(p.grad().defined());
  }
  SUBCASE("actor loss does not reach the latent") {
    const auto out = rl::actor_loss(n.actor, n.q1, n.q2, b.h, torch::randn({16, 2}, f64()), 0.2);
    out.loss.backward();
    CHECK_FALSE(b.h.grad().defined());
    double g = 0.0;
    for (auto& p : n.actor->parameters()) g += p.grad().abs().sum().item<double>();
    CHECK(g > 0.0);
    CHECK_FALSE(out.log_prob.requires_grad());
  }
}

TEST_CASE("actor loss matches its definition") {
  torch::manual_seed(5);
  Nets n;
  const auto h = torch::randn({16, 8}, f64());
  const auto noise = torch::randn({16, 2}, f64());
  const double alpha = 0.7;
  const auto out = rl::actor_loss(n.actor, n.q1, n.q2, h, noise, alpha);
  torch::NoGradGuard guard;
  const auto s = rl::sample_action(n.actor, h, noise);
  double ref = 0.0;
  for (int i = 0; i < 16; ++i) {
    const auto hi = h[i].unsqueeze(0), ai = s.action[i].unsqueeze(0);
    ref += alpha * s.log_prob[i].item<double>() - std::min(n.q1(hi, ai).item<double>(), n.q2(hi, ai).item<double>());
  }
  CHECK(out.loss.item<double>() == doctest::Approx(ref / 16).epsilon(1e-10));
}

TEST_CASE("twin critics start different") {
  torch::manual_seed(6);
  Nets n;
  const auto h = torch::randn({8, 8}, f64());
  const auto a = torch::rand({8, 2}, f64()) * 2 - 1;
  CHECK((n.q1(h, a) - n.q2(h, a)).abs().max().item<double>() > 1e-6);
}

TEST_CASE("temperature moves against the entropy surplus") {
  const double target = -2.0;
  for (double log_prob : {-1.0, 5.0}) {
    CAPTURE(log_prob);
    auto log_alpha = torch::zeros({}, f64()).requires_grad_(true);
    torch::optim::Adam opt({log_alpha}, torch::optim::AdamOptions(1e-2));
    const auto lp = torch::full({32}, log_prob, f64());
    for (int i = 0; i < 50; ++i) {
      opt.zero_grad();
      rl::alpha_loss(log_alpha, lp, target).backward();
      opt.step();
    }
    const double alpha = log_alpha.exp().item<double>();
    CHECK(alpha > 0.0);
    // Entropy -log_prob above the target lowers alpha; below it raises alpha.
    if (-log_prob > target) CHECK(alpha < 1.0);
    else CHECK(alpha > 1.0);
  }
}

TEST_CASE("temperature loss value and gradient") {
  auto log_alpha = torch::tensor(std::log(0.4), f64()).requires_grad_(true);
  const auto lp = torch::tensor({0.5, -1.5, 2.0}, f64()).requires_grad_(true);
  const auto loss = rl::alpha_loss(log_alpha, lp, -2.0);
  const double mean_bracket = ((0.5 - 2) + (-1.5 - 2) + (2.0 - 2)) / 3.0;
  CHECK(loss.item<double>() == doctest::Approx(-0.4 * mean_bracket).epsilon(1e-12));
  loss.backward();
  CHECK(log_alpha.grad().item<double>() == doctest::Approx(-0.4 * mean_bracket).epsilon(1e-12));
  CHECK_FALSE(lp.grad().defined());
}

TEST_CASE("finite-difference checks of the critic and actor losses") {
  torch::manual_seed(7);
  Nets n;
  const auto b0 = random_batch(8, 8);
  SUBCASE("critic loss") {
    auto b = b0;
    b.h = b.h.clone().requires_grad_(true);
    std::vector<torch::Tensor> params{b.h};
    for (auto& p : n.q1->parameters()) params.push_back(p);
    for (auto& p : n.q2->parameters()) params.push_back(p);
    const double err = oracle::gradient_check(params, [&] {
      return rl::critic_loss(n.q1, n.q2, n.q1t, n.q2t, n.actor, b, 0.3, 0.99).loss;
    });
    MESSAGE("critic loss relative error " << err);
    CHECK(err <= 1e-4);
  }
  SUBCASE("actor loss") {
    const auto noise = torch::randn({8, 2}, f64());
    std::vector<torch::Tensor> params;
    for (auto& p : n.actor->parameters()) params.push_back(p);
    const double err = oracle::gradient_check(params, [&] {
      return rl::actor_loss(n.actor, n.q1, n.q2, b0.h, noise, 0.3).loss;
    });
    MESSAGE("actor loss relative error " << err);
    CHECK(err <= 1e-4);
  }
}
