#pragma once

// Limited-memory BFGS: two-loop direction, strong-Wolfe line search, and a
// driver loop. Header-only, templated on the scalar type.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace hft {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// f(x, grad) -> value; fills grad with the gradient at x.
template <typename Scalar>
using Objective = std::function<Scalar(const VectorX<Scalar>&, VectorX<Scalar>&)>;

template <typename Scalar>
struct CurvaturePair {
  VectorX<Scalar> s;  // x_{k+1} - x_k
  VectorX<Scalar> y;  // g_{k+1} - g_k
};

// Ring buffer of at most m curvature pairs, oldest first.
template <typename Scalar>
class LbfgsHistory {
public:
  explicit LbfgsHistory(std::size_t m = 5) : m_(m) {
    if (m_ == 0) throw std::invalid_argument("L-BFGS memory must be >= 1");
  }

  // Stores the pair when s^T y > 1e-12 |s| |y|; returns whether it was kept.
  bool push(VectorX<Scalar> s, VectorX<Scalar> y) {
    if (s.size() != y.size()) throw std::invalid_argument("curvature pair length mismatch");
    const Scalar sy = s.dot(y);
    if (!(sy > Scalar(1e-12) * s.norm() * y.norm())) return false;
    if (pairs_.size() == m_) pairs_.pop_front();
    pairs_.push_back({std::move(s), std::move(y)});
    return true;
  }

  void clear() { pairs_.clear(); }
  std::size_t size() const { return pairs_.size(); }
  std::size_t capacity() const { return m_; }
  bool empty() const { return pairs_.empty(); }
  const std::deque<CurvaturePair<Scalar>>& pairs() const { return pairs_; }

  // Test hook: inserts without the curvature check.
  void push_unchecked(VectorX<Scalar> s, VectorX<Scalar> y) {
    if (pairs_.size() == m_) pairs_.pop_front();
    pairs_.push_back({std::move(s), std::move(y)});
  }

private:
  std::size_t m_;
  std::deque<CurvaturePair<Scalar>> pairs_;
};

// p = -H_k grad, H_0 = b0_scale * I.
template <typename Scalar>
VectorX<Scalar> two_loop_direction(const VectorX<Scalar>& grad, const LbfgsHistory<Scalar>& hist,
                                   Scalar b0_scale) {
  if (!(b0_scale > Scalar(0))) throw std::invalid_argument("b0_scale must be positive");
  const auto& pairs = hist.pairs();
  const std::size_t k = pairs.size();
  std::vector<Scalar> alpha(k), rho(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (pairs[i].s.size() != grad.size()) throw std::invalid_argument("curvature pair dimension mismatch");
    const Scalar ys = pairs[i].y.dot(pairs[i].s);
    if (!(ys > Scalar(0))) throw std::logic_error("L-BFGS history holds a pair with s^T y <= 0");
    rho[i] = Scalar(1) / ys;
  }

  VectorX<Scalar> q = grad;
  for (std::size_t i = k; i-- > 0;) {
    alpha[i] = rho[i] * pairs[i].s.dot(q);
    q -= alpha[i] * pairs[i].y;
  }
  q *= b0_scale;
  for (std::size_t i = 0; i < k; ++i) {
    const Scalar beta = rho[i] * pairs[i].y.dot(q);
    q += pairs[i].s * (alpha[i] - beta);
  }
  return -q;
}

struct LbfgsConfig {
  std::size_t m = 5;
  int max_iters = 200;
  double grad_tol = 1e-5;  // on the infinity norm
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int max_line_search_steps = 20;

  void validate() const {
    if (!(0.0 < wolfe_c1 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0))
      throw std::invalid_argument("Wolfe constants must satisfy 0 < c1 < c2 < 1");
    if (m == 0 || max_iters < 0 || max_line_search_steps < 1)
      throw std::invalid_argument("invalid L-BFGS configuration");
  }
};

template <typename Scalar>
struct LineSearchResult {
  bool ok = false;
  Scalar alpha = 0;
  VectorX<Scalar> x;  // x0 + alpha p (best point seen when !ok)
  Scalar value = 0;
  VectorX<Scalar> gradient;
  int evaluations = 0;
};

namespace detail {

// Minimizer of the cubic interpolating (a, fa, da), (b, fb, db); NaN if none.
template <typename Scalar>
Scalar cubic_minimizer(Scalar a, Scalar fa, Scalar da, Scalar b, Scalar fb, Scalar db) {
  const Scalar d1 = da + db - Scalar(3) * (fa - fb) / (a - b);
  const Scalar disc = d1 * d1 - da * db;
  if (!(disc >= Scalar(0))) return std::numeric_limits<Scalar>::quiet_NaN();
  const Scalar d2 = (b > a ? Scalar(1) : Scalar(-1)) * std::sqrt(disc);
  const Scalar denom = db - da + Scalar(2) * d2;
  if (denom == Scalar(0)) return std::numeric_limits<Scalar>::quiet_NaN();
  return b - (b - a) * (db + d2 - d1) / denom;
}

}  // namespace detail

// Bracketing + zoom search for a step satisfying the strong Wolfe conditions,
// starting at alpha = 1. Requires p^T g0 < 0.
template <typename Scalar>
LineSearchResult<Scalar> wolfe_line_search(const Objective<Scalar>& f, const VectorX<Scalar>& x,
                                           const VectorX<Scalar>& p, Scalar f0,
                                           const VectorX<Scalar>& g0, const LbfgsConfig& cfg) {
  const Scalar d0 = p.dot(g0);
  if (!(d0 < Scalar(0))) throw std::invalid_argument("line search needs a descent direction");
  const Scalar c1 = static_cast<Scalar>(cfg.wolfe_c1);
  const Scalar c2 = static_cast<Scalar>(cfg.wolfe_c2);

  struct Sample {
    Scalar alpha, value, slope;
    VectorX<Scalar> x, g;
  };
  LineSearchResult<Scalar> res;
  res.x = x;
  res.value = f0;
  res.gradient = g0;

  auto eval = [&](Scalar alpha) {
    Sample s{alpha, 0, 0, x + alpha * p, VectorX<Scalar>(x.size())};
    s.value = f(s.x, s.g);
    ++res.evaluations;
    if (!std::isfinite(s.value) || !s.g.allFinite()) {
      s.value = std::numeric_limits<Scalar>::infinity();
      s.slope = std::numeric_limits<Scalar>::quiet_NaN();
    } else {
      s.slope = s.g.dot(p);
      if (s.value < res.value) {
        res.alpha = alpha;
        res.x = s.x;
        res.value = s.value;
        res.gradient = s.g;
      }
    }
    return s;
  };
  auto armijo_fails = [&](const Sample& s) { return !(s.value <= f0 + c1 * s.alpha * d0); };
  auto curvature_ok = [&](const Sample& s) { return std::abs(s.slope) <= -c2 * d0; };
  auto accept = [&](Sample& s) {
    res.ok = true;
    res.alpha = s.alpha;
    res.x = std::move(s.x);
    res.value = s.value;
    res.gradient = std::move(s.g);
    return res;
  };

  auto zoom = [&](Sample lo, Sample hi) -> LineSearchResult<Scalar> {
    while (res.evaluations < cfg.max_line_search_steps) {
      const Scalar left = std::min(lo.alpha, hi.alpha);
      const Scalar right = std::max(lo.alpha, hi.alpha);
      const Scalar width = right - left;
      Scalar trial = std::numeric_limits<Scalar>::quiet_NaN();
      if (std::isfinite(hi.value) && std::isfinite(hi.slope))
        trial = detail::cubic_minimizer(lo.alpha, lo.value, lo.slope, hi.alpha, hi.value, hi.slope);
      // Keep the trial inside the bracket so it shrinks by at least 10% per step.
      if (!std::isfinite(trial))
        trial = left + Scalar(0.5) * width;
      else
        trial = std::clamp(trial, left + Scalar(0.1) * width, right - Scalar(0.1) * width);
      Sample s = eval(trial);
      if (armijo_fails(s) || s.value >= lo.value) {
        hi = std::move(s);
      } else {
        if (curvature_ok(s)) return accept(s);
        if (s.slope * (hi.alpha - lo.alpha) >= Scalar(0)) hi = lo;
        lo = std::move(s);
      }
      if (width <= std::numeric_limits<Scalar>::epsilon() * std::max(Scalar(1), right)) break;
    }
    return res;
  };

  Sample prev{Scalar(0), f0, d0, x, g0};
  Scalar alpha = 1;
  for (bool first = true; res.evaluations < cfg.max_line_search_steps; first = false) {
    Sample cur = eval(alpha);
    if (armijo_fails(cur) || (!first && cur.value >= prev.value)) return zoom(std::move(prev), std::move(cur));
    if (curvature_ok(cur)) return accept(cur);
    if (cur.slope >= Scalar(0)) return zoom(std::move(cur), std::move(prev));
    prev = std::move(cur);
    alpha *= Scalar(2);
  }
  return res;
}

enum class LbfgsStatus { Converged, MaxIterations, LineSearchFailed, NonFinite };

inline const char* to_string(LbfgsStatus s) {
  switch (s) {
    case LbfgsStatus::Converged: return "converged";
    case LbfgsStatus::MaxIterations: return "max-iterations";
    case LbfgsStatus::LineSearchFailed: return "line-search-failed";
    case LbfgsStatus::NonFinite: return "non-finite";
  }
  return "unknown";
}

template <typename Scalar>
struct OptimizeResult {
  VectorX<Scalar> x;
  Scalar value = 0;
  Scalar grad_norm = 0;  // infinity norm
  int iterations = 0;
  bool converged = false;
  LbfgsStatus status = LbfgsStatus::MaxIterations;
  // (value, grad_norm) at the start point and after every accepted iteration.
  std::vector<std::pair<Scalar, Scalar>> trace;
};

template <typename Scalar>
OptimizeResult<Scalar> minimize(const Objective<Scalar>& f, VectorX<Scalar> x0, const LbfgsConfig& cfg) {
  cfg.validate();
  OptimizeResult<Scalar> out;
  VectorX<Scalar> g(x0.size());
  Scalar value = f(x0, g);
  out.x = std::move(x0);
  if (!std::isfinite(value) || !g.allFinite()) {
    out.value = value;
    out.status = LbfgsStatus::NonFinite;
    return out;
  }
  Scalar gnorm = g.template lpNorm<Eigen::Infinity>();
  out.trace.emplace_back(value, gnorm);

  LbfgsHistory<Scalar> hist(cfg.m);
  Scalar b0 = 1;
  const Scalar tol = static_cast<Scalar>(cfg.grad_tol);
  out.status = LbfgsStatus::MaxIterations;
  while (true) {
    if (gnorm <= tol) {
      out.status = LbfgsStatus::Converged;
      break;
    }
    if (out.iterations >= cfg.max_iters) break;

    VectorX<Scalar> p = two_loop_direction(g, hist, b0);
    if (!(p.dot(g) < Scalar(0))) {
      hist.clear();
      b0 = 1;
      p = -g;
    }
    auto ls = wolfe_line_search<Scalar>(f, out.x, p, value, g, cfg);
    if (!ls.ok) {
      if (ls.value < value) {
        out.x = std::move(ls.x);
        value = ls.value;
        g = std::move(ls.gradient);
        gnorm = g.template lpNorm<Eigen::Infinity>();
        ++out.iterations;
        out.trace.emplace_back(value, gnorm);
      }
      out.status = gnorm <= tol ? LbfgsStatus::Converged : LbfgsStatus::LineSearchFailed;
      break;
    }
    VectorX<Scalar> s = ls.x - out.x;
    VectorX<Scalar> y = ls.gradient - g;
    const Scalar sy = s.dot(y);
    const Scalar yy = y.squaredNorm();
    if (hist.push(std::move(s), std::move(y))) b0 = sy / yy;

    out.x = std::move(ls.x);
    value = ls.value;
    g = std::move(ls.gradient);
    gnorm = g.template lpNorm<Eigen::Infinity>();
    ++out.iterations;
    out.trace.emplace_back(value, gnorm);
  }
  out.value = value;
  out.grad_norm = gnorm;
  out.converged = out.status == LbfgsStatus::Converged;
  return out;
}

}  // namespace hft
