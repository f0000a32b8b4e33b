// Vectorised forward evaluation of expressions over a dataset and
// reverse-mode gradients of the squared-error loss with respect to every
// scalar parameter (constants, gate steepness and thresholds).
#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "lgo/data.hpp"
#include "lgo/expr.hpp"
#include "lgo/ops.hpp"

namespace lgo {

/// Reusable evaluation workspace. Not thread-safe; use one per worker.
class Evaluator {
 public:
  /// Evaluates `e` on every row of `d`. Returns the prediction column.
  std::span<const double> forward(const Expression& e, const Dataset& d) {
    rows_ = d.rows();
    const std::size_t m = e.size();
    link_children(e);
    values_.assign(m * rows_, 0.0);
    for (std::size_t ii = m; ii-- > 0;) compute_node(e, d, ii);
    return column(0);
  }

  std::span<const double> node_values(std::size_t node) const { return column(node); }
  std::span<const double> output() const { return column(0); }

  /// Back-propagates d loss / d output (one entry per row). Returns a vector
  /// indexed by node holding d loss / d value for constant, Pos (w.r.t. the
  /// pre-softplus value) and Thr nodes; other entries are zero. Must follow
  /// forward() on the same expression.
  std::vector<double> backward(const Expression& e, std::span<const double> output_adjoint) {
    const std::size_t m = e.size();
    adjoint_.assign(m * rows_, 0.0);
    std::vector<double> grads(m, 0.0);
    std::copy(output_adjoint.begin(), output_adjoint.end(), adjoint_.begin());
    for (std::size_t i = 0; i < m; ++i) {
      const Node& n = e.nodes[i];
      if (n.kind == NodeKind::constant) {
        double acc = 0.0;
        for (std::size_t r = 0; r < rows_; ++r) acc += adj(i)[r];
        grads[i] += acc;
      } else if (n.kind == NodeKind::primitive) {
        propagate(e, i, grads);
      }
    }
    return grads;
  }

 private:
  std::span<double> col(std::size_t node) { return {values_.data() + node * rows_, rows_}; }
  std::span<const double> column(std::size_t node) const { return {values_.data() + node * rows_, rows_}; }
  std::span<double> adj(std::size_t node) { return {adjoint_.data() + node * rows_, rows_}; }

  void link_children(const Expression& e) {
    const std::size_t m = e.size();
    child_start_.assign(m + 1, 0);
    child_list_.clear();
    std::vector<std::size_t> stack;
    std::vector<std::vector<std::size_t>> tmp(m);
    for (std::size_t ii = m; ii-- > 0;) {
      const int k = e.nodes[ii].arity();
      if (static_cast<std::size_t>(k) > stack.size()) throw std::invalid_argument("malformed expression");
      for (int c = 0; c < k; ++c) {
        tmp[ii].push_back(stack.back());
        stack.pop_back();
      }
      stack.push_back(ii);
    }
    if (stack.size() != 1) throw std::invalid_argument("malformed expression");
    for (std::size_t i = 0; i < m; ++i) {
      child_start_[i] = child_list_.size();
      child_list_.insert(child_list_.end(), tmp[i].begin(), tmp[i].end());
    }
    child_start_[m] = child_list_.size();
  }

  std::size_t child(std::size_t i, int k) const { return child_list_[child_start_[i] + static_cast<std::size_t>(k)]; }

  /// (a, b) of the gate at i.
  std::pair<double, double> gate_params(const Expression& e, std::size_t i) const {
    const int k = e.nodes[i].arity();
    return {softplus(e.nodes[child(i, k - 2)].value), e.nodes[child(i, k - 1)].value};
  }

  void compute_node(const Expression& e, const Dataset& d, std::size_t i) {
    const Node& n = e.nodes[i];
    auto out = col(i);
    switch (n.kind) {
      case NodeKind::feature: {
        const auto& src = d.columns.at(static_cast<std::size_t>(n.feature));
        std::copy(src.begin(), src.end(), out.begin());
        return;
      }
      case NodeKind::constant:
        std::fill(out.begin(), out.end(), n.value);
        return;
      case NodeKind::exponent:
      case NodeKind::pos:
      case NodeKind::thr:
        return;  // scalars read directly by their parent
      case NodeKind::primitive:
        break;
    }
    auto in = [&](int k) { return column(child(i, k)); };
    const std::size_t R = rows_;
    switch (n.op) {
      case Op::add: { auto x = in(0), y = in(1); for (std::size_t r = 0; r < R; ++r) out[r] = x[r] + y[r]; break; }
      case Op::sub: { auto x = in(0), y = in(1); for (std::size_t r = 0; r < R; ++r) out[r] = x[r] - y[r]; break; }
      case Op::mul: { auto x = in(0), y = in(1); for (std::size_t r = 0; r < R; ++r) out[r] = x[r] * y[r]; break; }
      case Op::div: { auto x = in(0), y = in(1); for (std::size_t r = 0; r < R; ++r) out[r] = protected_div(x[r], y[r]); break; }
      case Op::sqrt: { auto x = in(0); for (std::size_t r = 0; r < R; ++r) out[r] = protected_sqrt(x[r]); break; }
      case Op::log: { auto x = in(0); for (std::size_t r = 0; r < R; ++r) out[r] = protected_log(x[r]); break; }
      case Op::exp: { auto x = in(0); for (std::size_t r = 0; r < R; ++r) out[r] = std::exp(x[r]); break; }
      case Op::inv: { auto x = in(0); for (std::size_t r = 0; r < R; ++r) out[r] = protected_inv(x[r]); break; }
      case Op::pow: {
        auto x = in(0);
        const int k = static_cast<int>(e.nodes[child(i, 1)].value);
        for (std::size_t r = 0; r < R; ++r) out[r] = int_pow(x[r], k);
        break;
      }
      case Op::lgo:
      case Op::gate_expr: {
        auto [a, b] = gate_params(e, i);
        auto x = in(0);
        for (std::size_t r = 0; r < R; ++r) out[r] = lgo_soft(x[r], a, b);
        break;
      }
      case Op::lgo_thre: {
        auto [a, b] = gate_params(e, i);
        auto x = in(0);
        for (std::size_t r = 0; r < R; ++r) out[r] = lgo_hard(x[r], a, b);
        break;
      }
      case Op::lgo_pair: {
        auto [a, b] = gate_params(e, i);
        auto x = in(0), y = in(1);
        for (std::size_t r = 0; r < R; ++r) out[r] = lgo::lgo_pair(x[r], y[r], a, b);
        break;
      }
      case Op::lgo_and2: {
        auto [a, b] = gate_params(e, i);
        auto x = in(0), y = in(1);
        for (std::size_t r = 0; r < R; ++r) out[r] = lgo::lgo_and2(x[r], y[r], a, b);
        break;
      }
      case Op::lgo_or2: {
        auto [a, b] = gate_params(e, i);
        auto x = in(0), y = in(1);
        for (std::size_t r = 0; r < R; ++r) out[r] = lgo::lgo_or2(x[r], y[r], a, b);
        break;
      }
      case Op::lgo_and3: {
        auto [a, b] = gate_params(e, i);
        auto x = in(0), y = in(1), z = in(2);
        for (std::size_t r = 0; r < R; ++r) out[r] = lgo::lgo_and3(x[r], y[r], z[r], a, b);
        break;
      }
    }
  }

  void propagate(const Expression& e, std::size_t i, std::vector<double>& grads) {
    const Node& n = e.nodes[i];
    const auto g = std::span<const double>(adjoint_.data() + i * rows_, rows_);
    const auto v = column(i);
    const std::size_t R = rows_;
    auto in = [&](int k) { return column(child(i, k)); };
    auto ad = [&](int k) { return adj(child(i, k)); };
    switch (n.op) {
      case Op::add: { auto a0 = ad(0), a1 = ad(1); for (std::size_t r = 0; r < R; ++r) { a0[r] += g[r]; a1[r] += g[r]; } return; }
      case Op::sub: { auto a0 = ad(0), a1 = ad(1); for (std::size_t r = 0; r < R; ++r) { a0[r] += g[r]; a1[r] -= g[r]; } return; }
      case Op::mul: {
        auto x = in(0), y = in(1);
        auto a0 = ad(0), a1 = ad(1);
        for (std::size_t r = 0; r < R; ++r) { a0[r] += g[r] * y[r]; a1[r] += g[r] * x[r]; }
        return;
      }
      case Op::div: {
        auto x = in(0), y = in(1);
        auto a0 = ad(0), a1 = ad(1);
        for (std::size_t r = 0; r < R; ++r) {
          const double den = protect_denominator(y[r]);
          a0[r] += g[r] / den;
          if (std::abs(y[r]) >= kProtectEps) a1[r] -= g[r] * x[r] / (den * den);
        }
        return;
      }
      case Op::sqrt: {
        auto x = in(0);
        auto a0 = ad(0);
        for (std::size_t r = 0; r < R; ++r)
          if (v[r] > 0.0) a0[r] += g[r] * (x[r] < 0 ? -1.0 : 1.0) / (2.0 * v[r]);
        return;
      }
      case Op::log: {
        auto x = in(0);
        auto a0 = ad(0);
        for (std::size_t r = 0; r < R; ++r)
          if (x[r] > kProtectEps) a0[r] += g[r] / x[r];
        return;
      }
      case Op::exp: { auto a0 = ad(0); for (std::size_t r = 0; r < R; ++r) a0[r] += g[r] * v[r]; return; }
      case Op::inv: {
        auto x = in(0);
        auto a0 = ad(0);
        for (std::size_t r = 0; r < R; ++r)
          if (std::abs(x[r]) >= kProtectEps) a0[r] -= g[r] / (x[r] * x[r]);
        return;
      }
      case Op::pow: {
        auto x = in(0);
        auto a0 = ad(0);
        const int k = static_cast<int>(e.nodes[child(i, 1)].value);
        if (k == 0) return;
        for (std::size_t r = 0; r < R; ++r) {
          if (k < 0 && std::abs(std::pow(x[r], -k)) < kProtectEps) continue;
          a0[r] += g[r] * k * std::pow(x[r], k - 1);
        }
        return;
      }
      default:
        break;
    }
    propagate_gate(e, i, g, grads);
  }

  void propagate_gate(const Expression& e, std::size_t i, std::span<const double> g, std::vector<double>& grads) {
    const Node& n = e.nodes[i];
    const int k = n.arity();
    const std::size_t pos_node = child(i, k - 2);
    const std::size_t thr_node = child(i, k - 1);
    const double a_tilde = e.nodes[pos_node].value;
    const double a = softplus(a_tilde);
    const double b = e.nodes[thr_node].value;
    const std::size_t R = rows_;
    double d_a = 0.0, d_b = 0.0;
    auto in = [&](int c) { return column(child(i, c)); };
    auto ad = [&](int c) { return adj(child(i, c)); };

    switch (n.op) {
      case Op::lgo:
      case Op::gate_expr: {
        auto x = in(0);
        auto a0 = ad(0);
        for (std::size_t r = 0; r < R; ++r) {
          const GateEval ge = gate_eval(x[r], a, b);
          const double sl = gate_slope(ge);
          d_a += g[r] * x[r] * ge.delta * sl;
          d_b += g[r] * (-a * x[r] * sl);
          a0[r] += g[r] * (ge.s + x[r] * a * sl);
        }
        break;
      }
      case Op::lgo_thre: {
        auto x = in(0);
        auto a0 = ad(0);
        for (std::size_t r = 0; r < R; ++r) {
          const GateEval ge = gate_eval(x[r], a, b);
          const double sl = gate_slope(ge);
          d_a += g[r] * ge.delta * sl;
          d_b += g[r] * (-a * sl);
          a0[r] += g[r] * a * sl;
        }
        break;
      }
      case Op::lgo_pair: {
        auto x = in(0), y = in(1);
        auto a0 = ad(0), a1 = ad(1);
        for (std::size_t r = 0; r < R; ++r) {
          const GateEval ge = gate_eval(x[r] - y[r], a, b);
          const double sl = gate_slope(ge);
          const double p = x[r] * y[r];
          d_a += g[r] * p * ge.delta * sl;
          d_b += g[r] * (-a * p * sl);
          a0[r] += g[r] * (y[r] * ge.s + p * a * sl);
          a1[r] += g[r] * (x[r] * ge.s - p * a * sl);
        }
        break;
      }
      case Op::lgo_and2:
      case Op::lgo_and3: {
        const int m = k - 2;
        std::array<std::span<const double>, 3> xs{};
        std::array<std::span<double>, 3> as{};
        for (int c = 0; c < m; ++c) { xs[static_cast<std::size_t>(c)] = in(c); as[static_cast<std::size_t>(c)] = ad(c); }
        for (std::size_t r = 0; r < R; ++r) {
          std::array<GateEval, 3> ge{};
          double prod = 1.0, sprod = 1.0;
          for (int c = 0; c < m; ++c) {
            const auto cc = static_cast<std::size_t>(c);
            ge[cc] = gate_eval(xs[cc][r], a, b);
            prod *= xs[cc][r];
            sprod *= ge[cc].s;
          }
          for (int c = 0; c < m; ++c) {
            const auto cc = static_cast<std::size_t>(c);
            // product of the other inputs' gates, and of the other inputs
            double s_others = 1.0, x_others = 1.0;
            for (int o = 0; o < m; ++o) {
              if (o == c) continue;
              s_others *= ge[static_cast<std::size_t>(o)].s;
              x_others *= xs[static_cast<std::size_t>(o)][r];
            }
            const double sl = gate_slope(ge[cc]);
            d_a += g[r] * prod * s_others * ge[cc].delta * sl;
            d_b += g[r] * prod * s_others * (-a * sl);
            as[cc][r] += g[r] * (x_others * sprod + prod * s_others * a * sl);
          }
        }
        break;
      }
      case Op::lgo_or2: {
        auto x = in(0), y = in(1);
        auto a0 = ad(0), a1 = ad(1);
        for (std::size_t r = 0; r < R; ++r) {
          const GateEval gx = gate_eval(x[r], a, b);
          const GateEval gy = gate_eval(y[r], a, b);
          const double slx = gate_slope(gx), sly = gate_slope(gy);
          const double sum = x[r] + y[r];
          const double p = 1.0 - (1.0 - gx.s) * (1.0 - gy.s);
          d_a += g[r] * sum * ((1.0 - gy.s) * gx.delta * slx + (1.0 - gx.s) * gy.delta * sly);
          d_b += g[r] * sum * ((1.0 - gy.s) * (-a * slx) + (1.0 - gx.s) * (-a * sly));
          a0[r] += g[r] * (p + sum * (1.0 - gy.s) * a * slx);
          a1[r] += g[r] * (p + sum * (1.0 - gx.s) * a * sly);
        }
        break;
      }
      default:
        break;
    }
    grads[pos_node] += d_a * softplus_grad(a_tilde);
    grads[thr_node] += d_b;
  }

  std::size_t rows_ = 0;
  std::vector<double> values_;
  std::vector<double> adjoint_;
  std::vector<std::size_t> child_start_;
  std::vector<std::size_t> child_list_;
};

inline std::vector<double> evaluate(const Expression& e, const Dataset& d) {
  Evaluator ev;
  auto out = ev.forward(e, d);
  return {out.begin(), out.end()};
}

inline double rmse_of(std::span<const double> pred, std::span<const double> y) {
  double ss = 0.0;
  for (std::size_t r = 0; r < y.size(); ++r) {
    const double d = pred[r] - y[r];
    ss += d * d;
  }
  const double v = std::sqrt(ss / static_cast<double>(y.size()));
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

/// Training RMSE of `e` on `d`; +inf when any prediction is non-finite.
inline double rmse_loss(Evaluator& ev, const Expression& e, const Dataset& d) {
  return rmse_of(ev.forward(e, d), d.y);
}

struct LossGradient {
  double loss = 0.0;               // RMSE
  std::vector<double> grad;        // d RMSE / d parameter, indexed by node
};

inline LossGradient rmse_gradient(Evaluator& ev, const Expression& e, const Dataset& d) {
  auto pred = ev.forward(e, d);
  LossGradient out;
  out.loss = rmse_of(pred, d.y);
  if (!std::isfinite(out.loss) || out.loss == 0.0) {
    out.grad.assign(e.size(), 0.0);
    return out;
  }
  const double n = static_cast<double>(d.rows());
  std::vector<double> seed(d.rows());
  for (std::size_t r = 0; r < d.rows(); ++r) seed[r] = (pred[r] - d.y[r]) / (n * out.loss);
  out.grad = ev.backward(e, seed);
  return out;
}

/// Training-fold standardization of a gated subexpression.
struct SubexprStats {
  double mu = 0.0;
  double sigma = 0.0;
  bool invertible = false;
};

inline SubexprStats fit_subexpr_stats(const Expression& subtree, const Dataset& z_train) {
  const auto vals = evaluate(subtree, z_train);
  for (double v : vals)
    if (!std::isfinite(v)) return {};
  auto [m, sd] = mean_std(vals);
  SubexprStats s{m, sd, sd > 1e-12 * std::max(1.0, std::abs(m))};
  return s;
}

}  // namespace lgo
