// Post-search refinement with fixed structure: constant refit and coordinate
// descent on gate parameters, both driven by the sign of the analytic loss
// gradient with backtracking.
#pragma once

#include <cmath>
#include <vector>

#include "lgo/data.hpp"
#include "lgo/eval.hpp"
#include "lgo/expr.hpp"
#include "lgo/ops.hpp"

namespace lgo {

struct RefineConfig {
  int steps = 60;             // full cycles over all coordinates
  double step_a = 0.5;        // initial step on a_tilde
  double step_b = 0.25;       // initial step on b_z
  double step_const = 0.5;    // initial step on constants
  double shrink = 0.5;
  double grow = 2.0;          // step growth after an accepted move
  double min_step = 1e-4;     // gate coordinates
  double min_step_const = 1e-9;
  int max_moves = 10;         // accepted moves per coordinate per cycle

  void validate() const {
    if (steps < 0) throw ConfigError("refine steps must be >= 0");
    if (!(shrink > 0.0 && shrink < 1.0)) throw ConfigError("refine shrink must lie in (0, 1)");
    if (grow < 1.0) throw ConfigError("refine grow must be >= 1");
  }
};

struct RefineResult {
  Expression expr;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  bool non_finite_start = false;
  int cycles = 0;
  std::vector<double> accepted_losses;  // loss after each accepted move
};

namespace detail {

struct Coordinate {
  std::size_t node;
  double step;
  double min_step;
  bool threshold;  // clip to [-3, 3]
};

inline RefineResult coordinate_descent(const Expression& start, const Dataset& data, std::vector<Coordinate> coords,
                                       const RefineConfig& cfg) {
  cfg.validate();
  Evaluator ev;
  RefineResult res;
  res.expr = start;
  res.initial_loss = rmse_loss(ev, start, data);
  res.final_loss = res.initial_loss;
  if (!std::isfinite(res.initial_loss)) {
    res.non_finite_start = true;
    return res;
  }
  if (coords.empty()) return res;
  for (auto& c : coords)
    if (c.threshold) res.expr.nodes[c.node].value = clip_threshold(res.expr.nodes[c.node].value);
  double loss = rmse_loss(ev, res.expr, data);
  if (loss > res.initial_loss) {
    res.expr = start;  // clipping made it worse; keep the unclipped start untouched
    loss = res.initial_loss;
  }
  for (int cycle = 0; cycle < cfg.steps; ++cycle) {
    bool active = false;
    for (auto& c : coords) {
      if (c.step < c.min_step) continue;
      active = true;
      const LossGradient lg = rmse_gradient(ev, res.expr, data);
      const double g = lg.grad[c.node];
      if (g == 0.0 || !std::isfinite(g)) {
        c.step *= cfg.shrink;
        continue;
      }
      const double dir = g > 0.0 ? -1.0 : 1.0;
      for (int move = 0; move < cfg.max_moves; ++move) {
        const double old = res.expr.nodes[c.node].value;
        double proposed = old + dir * c.step;
        if (c.threshold) proposed = clip_threshold(proposed);
        if (proposed == old) {
          c.step *= cfg.shrink;
          break;
        }
        res.expr.nodes[c.node].value = proposed;
        const double trial = rmse_loss(ev, res.expr, data);
        if (trial < loss) {
          loss = trial;
          res.accepted_losses.push_back(loss);
          c.step *= cfg.grow;
        } else {
          res.expr.nodes[c.node].value = old;
          c.step *= cfg.shrink;
          break;
        }
      }
    }
    res.cycles = cycle + 1;
    if (!active) break;
  }
  res.final_loss = loss;
  return res;
}

}  // namespace detail

/// Coordinate descent over every gate's (a_tilde, b_z) in prefix order,
/// a_tilde before b_z. Loss is training RMSE; only strict improvements are
/// accepted and thresholds stay inside [-3, 3].
inline RefineResult coordinate_descent_gates(const Expression& e, const Dataset& z_train,
                                             const RefineConfig& cfg = {}) {
  std::vector<detail::Coordinate> coords;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (e.nodes[i].kind == NodeKind::pos) coords.push_back({i, cfg.step_a, cfg.min_step, false});
    if (e.nodes[i].kind == NodeKind::thr) coords.push_back({i, cfg.step_b, cfg.min_step, true});
  }
  return detail::coordinate_descent(e, z_train, std::move(coords), cfg);
}

/// Re-optimises ephemeral constants with the same descent scheme.
inline RefineResult refit_constants(const Expression& e, const Dataset& z_train, const RefineConfig& cfg = {}) {
  std::vector<detail::Coordinate> coords;
  for (std::size_t i = 0; i < e.size(); ++i)
    if (e.nodes[i].kind == NodeKind::constant) coords.push_back({i, cfg.step_const, cfg.min_step_const, false});
  return detail::coordinate_descent(e, z_train, std::move(coords), cfg);
}

/// Constant refit followed by gate coordinate descent.
inline RefineResult refit_and_refine(const Expression& e, const Dataset& z_train, const RefineConfig& cfg = {}) {
  RefineResult a = refit_constants(e, z_train, cfg);
  RefineResult b = coordinate_descent_gates(a.expr, z_train, cfg);
  b.initial_loss = a.initial_loss;
  b.non_finite_start = a.non_finite_start;
  b.accepted_losses.insert(b.accepted_losses.begin(), a.accepted_losses.begin(), a.accepted_losses.end());
  return b;
}

}  // namespace lgo
