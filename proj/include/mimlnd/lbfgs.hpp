#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "mimlnd/error.hpp"
#include "mimlnd/types.hpp"

namespace mimlnd {

// Evaluates f(x) and writes grad f(x) into `gradient` (already sized to x).
using ObjectiveOracle = std::function<double(const Vector& x, Vector& gradient)>;

// Optional evaluation along a search line. `start(x, d)` is called once per
// iteration at the current iterate; `along(step, gradient)` then returns f and
// grad f at x + step * d. Objectives that depend on x through a linear map can
// reuse the image of d across backtracking steps.
struct LineOracle {
  std::function<void(const Vector& x, const Vector& d)> start;
  std::function<double(double step, Vector& gradient)> along;

  explicit operator bool() const { return start && along; }
};

struct LbfgsConfig {
  int memory = 10;
  int max_iters = 200;
  double grad_tol = 1e-6;  // sup-norm of the gradient
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 50;
  // Stop once an accepted step decreases f by less than
  // rel_tol * max(1, |f|). Zero disables the test.
  double rel_tol = 0.0;

  void validate() const {
    if (memory < 1) throw ParameterError("lbfgs: memory must be >= 1");
    if (max_iters < 1) throw ParameterError("lbfgs: max_iters must be >= 1");
    if (!(grad_tol > 0)) throw ParameterError("lbfgs: grad_tol must be > 0");
    if (!(armijo_c1 > 0 && armijo_c1 < 1))
      throw ParameterError("lbfgs: armijo c1 must lie in (0,1)");
    if (!(backtrack > 0 && backtrack < 1))
      throw ParameterError("lbfgs: backtrack factor must lie in (0,1)");
    if (max_backtracks < 1)
      throw ParameterError("lbfgs: max_backtracks must be >= 1");
    if (!(rel_tol >= 0)) throw ParameterError("lbfgs: rel_tol must be >= 0");
  }
};

enum class LbfgsStatus { Converged, SmallDecrease, MaxIterations, Stalled };

inline const char* to_string(LbfgsStatus s) {
  switch (s) {
    case LbfgsStatus::Converged: return "converged";
    case LbfgsStatus::SmallDecrease: return "small-decrease";
    case LbfgsStatus::MaxIterations: return "max-iterations";
    case LbfgsStatus::Stalled: return "stalled";
  }
  return "unknown";
}

struct LbfgsResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  LbfgsStatus status = LbfgsStatus::MaxIterations;
  // f at x0 followed by f at every accepted iterate.
  std::vector<double> history;

  bool stalled() const { return status == LbfgsStatus::Stalled; }
};

namespace detail {

inline void check_finite(double f, const Vector& g, int evaluation) {
  if (!std::isfinite(f) || !g.allFinite()) {
    std::ostringstream msg;
    msg << "lbfgs: oracle returned a non-finite "
        << (std::isfinite(f) ? "gradient" : "value") << " at evaluation "
        << evaluation;
    throw ConvergenceError(msg.str());
  }
}

}  // namespace detail

// Limited-memory BFGS with two-loop recursion and Armijo backtracking.
// Throws ConvergenceError if the oracle ever returns non-finite output;
// a line search that cannot find decrease returns the current iterate with
// status Stalled.
// If `line` is set, trial points are evaluated through it and `oracle` is
// only called at x0.
inline LbfgsResult lbfgs_minimize(const ObjectiveOracle& oracle, Vector x0,
                                  const LbfgsConfig& cfg = {},
                                  const LineOracle& line = {}) {
  cfg.validate();
  if (!x0.allFinite()) throw ParameterError("lbfgs: x0 must be finite");

  LbfgsResult result;
  const Index n = x0.size();
  Vector x = std::move(x0);
  Vector g(n);
  double f = oracle(x, g);
  ++result.evaluations;
  detail::check_finite(f, g, result.evaluations);
  result.history.push_back(f);

  std::deque<Vector> s_hist, y_hist;
  std::deque<double> rho_hist;
  Vector d(n), x_new(n), g_new(n);
  std::vector<double> alpha_buf(static_cast<std::size_t>(cfg.memory));

  result.status = LbfgsStatus::MaxIterations;
  for (int k = 0; k < cfg.max_iters; ++k) {
    if (g.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) {
      result.status = LbfgsStatus::Converged;
      break;
    }

    // Two-loop recursion: d = -H g.
    d = -g;
    const auto m = s_hist.size();
    for (std::size_t i = m; i-- > 0;) {
      alpha_buf[i] = rho_hist[i] * s_hist[i].dot(d);
      d.noalias() -= alpha_buf[i] * y_hist[i];
    }
    if (m > 0) d *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < m; ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(d);
      d.noalias() += (alpha_buf[i] - beta) * s_hist[i];
    }

    double slope = g.dot(d);
    double step = 1.0;
    if (m == 0 || !(slope < 0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      // Scaled steepest descent; stableNorm keeps huge gradients finite.
      const double gn = g.stableNorm();
      const double scale = std::max(1.0, gn);
      d = -g / scale;
      slope = -gn * (gn / scale);
    }

    bool accepted = false;
    double f_new = f;
    if (line) line.start(x, d);
    for (int b = 0; b < cfg.max_backtracks; ++b) {
      x_new = x + step * d;
      f_new = line ? line.along(step, g_new) : oracle(x_new, g_new);
      ++result.evaluations;
      detail::check_finite(f_new, g_new, result.evaluations);
      if (f_new <= f + cfg.armijo_c1 * step * slope) {
        accepted = true;
        break;
      }
      step *= cfg.backtrack;
    }
    if (!accepted) {
      result.status = LbfgsStatus::Stalled;
      break;
    }

    Vector s = x_new - x;
    Vector y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm() && sy > 0) {
      if (static_cast<int>(s_hist.size()) == cfg.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
    }

    const double decrease = f - f_new;
    x.swap(x_new);
    g.swap(g_new);
    f = f_new;
    ++result.iterations;
    result.history.push_back(f);

    if (cfg.rel_tol > 0 && decrease <= cfg.rel_tol * std::max(1.0, std::abs(f))) {
      result.status = LbfgsStatus::SmallDecrease;
      break;
    }
  }

  if (result.status == LbfgsStatus::MaxIterations &&
      g.lpNorm<Eigen::Infinity>() <= cfg.grad_tol)
    result.status = LbfgsStatus::Converged;
  result.x = std::move(x);
  result.value = f;
  return result;
}

}  // namespace mimlnd
