#include "hft/lbfgs.hpp"
#include "oracles/reference.hpp"

#include <doctest.h>

#include <random>

using hft::LbfgsConfig;
using hft::LbfgsHistory;
using Vec = Eigen::VectorXd;

namespace {

hft::Objective<double> quadratic() {
  return [](const Vec& x, Vec& g) {
    g = x;
    return 0.5 * x.squaredNorm();
  };
}

hft::Objective<double> rosenbrock() {
  return [](const Vec& x, Vec& g) {
    const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
    g.resize(2);
    g[0] = -2.0 * a - 400.0 * x[0] * b;
    g[1] = 200.0 * b;
    return a * a + 100.0 * b * b;
  };
}

// Random history whose pairs all satisfy s^T y > 0 (y = A s with A SPD).
std::vector<std::pair<Vec, Vec>> random_pairs(std::mt19937_64& rng, int dim, int count) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd b(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) b(i, j) = n(rng);
  const Eigen::MatrixXd a = b * b.transpose() + Eigen::MatrixXd::Identity(dim, dim);
  std::vector<std::pair<Vec, Vec>> out;
  for (int k = 0; k < count; ++k) {
    Vec s(dim);
    for (int i = 0; i < dim; ++i) s[i] = n(rng);
    out.emplace_back(s, a * s);
  }
  return out;
}

}  // namespace

TEST_CASE("two-loop with empty history is steepest descent") {
  LbfgsHistory<double> h;
  const Vec p = hft::two_loop_direction<double>(Vec{{2.0, -3.0}}, h, 1.0);
  CHECK(p[0] == -2.0);
  CHECK(p[1] == 3.0);
}

TEST_CASE("two-loop with one identity pair") {
  LbfgsHistory<double> h;
  REQUIRE(h.push(Vec{{1.0, 0.0}}, Vec{{1.0, 0.0}}));
  const Vec p = hft::two_loop_direction<double>(Vec{{2.0, 0.0}}, h, 1.0);
  CHECK(p[0] == doctest::Approx(-2.0).epsilon(1e-15));
  CHECK(p[1] == 0.0);
}

TEST_CASE("two-loop of a zero gradient is zero") {
  std::mt19937_64 rng(3);
  LbfgsHistory<double> h;
  for (auto& [s, y] : random_pairs(rng, 6, 4)) h.push(s, y);
  CHECK(hft::two_loop_direction<double>(Vec::Zero(6), h, 0.7).norm() == 0.0);
}

TEST_CASE("two-loop matches the dense inverse-BFGS product") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim_pick(1, 20), count_pick(0, 5);
  std::uniform_real_distribution<double> b0_pick(0.1, 3.0);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = dim_pick(rng);
    const auto pairs = random_pairs(rng, dim, count_pick(rng));
    LbfgsHistory<double> h;
    for (const auto& [s, y] : pairs) REQUIRE(h.push(s, y));
    Vec g(dim);
    for (int i = 0; i < dim; ++i) g[i] = n(rng);
    const double b0 = b0_pick(rng);
    const Vec fast = hft::two_loop_direction<double>(g, h, b0);
    const Vec dense = oracle::dense_bfgs_direction(g, pairs, b0);
    CHECK((fast - dense).lpNorm<Eigen::Infinity>() < 1e-10);
    // Descent for valid histories.
    if (g.norm() > 0) CHECK(fast.dot(g) < 0.0);
  }
}

TEST_CASE("history keeps at most m pairs, oldest evicted") {
  LbfgsHistory<double> h(3);
  for (int k = 1; k <= 7; ++k) {
    h.push(Vec::Constant(2, k), Vec::Constant(2, 1.0));
    CHECK(h.size() <= 3);
  }
  REQUIRE(h.size() == 3);
  CHECK(h.pairs().front().s[0] == 5.0);
  CHECK(h.pairs().back().s[0] == 7.0);
}

TEST_CASE("history rejects pairs failing the curvature condition") {
  LbfgsHistory<double> h;
  CHECK_FALSE(h.push(Vec{{1.0, 0.0}}, Vec{{-1.0, 0.0}}));
  CHECK_FALSE(h.push(Vec{{1.0, 0.0}}, Vec{{0.0, 1.0}}));
  CHECK(h.empty());
  CHECK_THROWS_AS(h.push(Vec{{1.0}}, Vec{{1.0, 2.0}}), std::invalid_argument);
  CHECK_THROWS_AS(LbfgsHistory<double>(0), std::invalid_argument);
}

TEST_CASE("two-loop refuses a corrupted history") {
  LbfgsHistory<double> h;
  h.push_unchecked(Vec{{1.0, 0.0}}, Vec{{-1.0, 0.0}});
  CHECK_THROWS_AS(hft::two_loop_direction<double>(Vec{{1.0, 1.0}}, h, 1.0), std::logic_error);
  LbfgsHistory<double> ok;
  CHECK_THROWS_AS(hft::two_loop_direction<double>(Vec{{1.0}}, ok, 0.0), std::invalid_argument);
}

TEST_CASE("line search on x^2 from 1 along -2 finds the minimizer") {
  const hft::Objective<double> f = [](const Vec& x, Vec& g) {
    g = 2.0 * x;
    return x.squaredNorm();
  };
  const Vec x{{1.0}};
  Vec g0{{2.0}};
  const auto r = hft::wolfe_line_search<double>(f, x, Vec{{-2.0}}, 1.0, g0, LbfgsConfig{});
  REQUIRE(r.ok);
  CHECK(r.alpha == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(r.x[0]) < 1e-12);
  CHECK(r.value <= 1.0 + 1e-4 * r.alpha * -4.0);
}

TEST_CASE("unit step is accepted when it is the exact minimizer") {
  const auto r = hft::wolfe_line_search<double>(quadratic(), Vec{{3.0, -1.0}}, Vec{{-3.0, 1.0}}, 5.0,
                                                Vec{{3.0, -1.0}}, LbfgsConfig{});
  REQUIRE(r.ok);
  CHECK(r.alpha == 1.0);
  CHECK(r.evaluations == 1);
}

TEST_CASE("line search along an unbounded linear descent fails") {
  const hft::Objective<double> f = [](const Vec& x, Vec& g) {
    g = Vec::Constant(x.size(), 1.0);
    return x.sum();
  };
  LbfgsConfig cfg;
  const auto r = hft::wolfe_line_search<double>(f, Vec{{0.0}}, Vec{{-1.0}}, 0.0, Vec{{1.0}}, cfg);
  CHECK_FALSE(r.ok);
  CHECK(r.evaluations == cfg.max_line_search_steps);
  CHECK(r.value < 0.0);  // carries the best point seen
}

TEST_CASE("line search handles steps far below 1") {
  const double k = 1e9;
  const hft::Objective<double> f = [k](const Vec& x, Vec& g) {
    g = k * x;
    return 0.5 * k * x.squaredNorm();
  };
  const auto r = hft::wolfe_line_search<double>(f, Vec{{1.0}}, Vec{{-k}}, 0.5 * k, Vec{{k}}, LbfgsConfig{});
  CHECK(r.ok);
  CHECK(r.value < 0.5 * k);
}

TEST_CASE("line search rejects an ascent direction") {
  CHECK_THROWS_AS(hft::wolfe_line_search<double>(quadratic(), Vec{{1.0}}, Vec{{1.0}}, 0.5, Vec{{1.0}}, LbfgsConfig{}),
                  std::invalid_argument);
}

TEST_CASE("quadratic is solved in at most 3 iterations") {
  const auto r = hft::minimize<double>(quadratic(), Vec{{4.0, -4.0}}, LbfgsConfig{});
  CHECK(r.converged);
  CHECK(r.iterations <= 3);
  CHECK(r.x.norm() < 1e-8);
}

TEST_CASE("start point at tolerance takes 0 iterations") {
  const auto r = hft::minimize<double>(quadratic(), Vec{{1e-7, 0.0}}, LbfgsConfig{});
  CHECK(r.converged);
  CHECK(r.iterations == 0);
  CHECK(r.status == hft::LbfgsStatus::Converged);
}

TEST_CASE("rosenbrock converges with a monotone trace") {
  LbfgsConfig cfg;
  cfg.max_iters = 100;
  cfg.grad_tol = 1e-6;
  const auto r = hft::minimize<double>(rosenbrock(), Vec{{-1.2, 1.0}}, cfg);
  CHECK(r.converged);
  CHECK(r.grad_norm < 1e-6);
  CHECK(std::abs(r.x[0] - 1.0) < 1e-5);
  CHECK(std::abs(r.x[1] - 1.0) < 1e-5);
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i].first < r.trace[i - 1].first);
}

TEST_CASE("max_iters stops early without claiming convergence") {
  LbfgsConfig cfg;
  cfg.max_iters = 3;
  const auto r = hft::minimize<double>(rosenbrock(), Vec{{-1.2, 1.0}}, cfg);
  CHECK(r.iterations == 3);
  CHECK_FALSE(r.converged);
  CHECK(r.status == hft::LbfgsStatus::MaxIterations);
}

TEST_CASE("non-finite start is reported") {
  const hft::Objective<double> f = [](const Vec& x, Vec& g) {
    g = x;
    return std::nan("");
  };
  const auto r = hft::minimize<double>(f, Vec{{1.0}}, LbfgsConfig{});
  CHECK(r.status == hft::LbfgsStatus::NonFinite);
  CHECK_FALSE(r.converged);
}

TEST_CASE("bad Wolfe constants are rejected") {
  LbfgsConfig cfg;
  cfg.wolfe_c1 = 0.95;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK_THROWS_AS(hft::minimize<double>(quadratic(), Vec{{1.0}}, cfg), std::invalid_argument);
}

TEST_CASE("single precision instantiation works") {
  const hft::Objective<float> f = [](const Eigen::VectorXf& x, Eigen::VectorXf& g) {
    g = x;
    return 0.5f * x.squaredNorm();
  };
  LbfgsConfig cfg;
  cfg.grad_tol = 1e-4;
  const auto r = hft::minimize<float>(f, Eigen::VectorXf::Constant(3, 2.0f), cfg);
  CHECK(r.converged);
  CHECK(r.x.norm() < 1e-4f);
}
