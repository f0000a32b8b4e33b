// Canonical rewriting of raw expressions: constant folding, neutral and
// absorbing removal, guarded identities, n-ary flattening with a total
// argument order, and gate compaction. Every stage is checked for numeric
// equivalence on the test split before it is kept.
#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "lgo/data.hpp"
#include "lgo/eval.hpp"
#include "lgo/expr.hpp"
#include "lgo/metrics.hpp"
#include "lgo/ops.hpp"

namespace lgo {

enum class SKind : std::uint8_t {
  constant, feature, add, mul, sub, div, sqrt, log, exp, inv, pow,
  gate,      // sigma(a (x - b)) on one input
  raw_gate,  // any engine gate not yet compacted, kept with its original op
};

/// Simplifier tree node. add and mul are n-ary.
struct SNode {
  SKind kind = SKind::constant;
  double value = 0.0;
  int feature = -1;
  int exponent = 0;
  Op op = Op::add;  // raw_gate only
  double a_tilde = 0.0;
  double b = 0.0;
  std::vector<SNode> kids;

  SNode() = default;
  explicit SNode(SKind k, double v = 0.0) : kind(k), value(v) {}

  static SNode constant(double v) { return SNode(SKind::constant, v); }
  static SNode feat(int j) {
    SNode n(SKind::feature);
    n.feature = j;
    return n;
  }
  static SNode make(SKind k, std::vector<SNode> kids) {
    SNode n(k);
    n.kids = std::move(kids);
    return n;
  }
  static SNode make_gate(SNode x, double a_tilde, double b) {
    SNode n(SKind::gate);
    n.a_tilde = a_tilde;
    n.b = b;
    n.kids.push_back(std::move(x));
    return n;
  }

  bool is_constant(double v) const { return kind == SKind::constant && value == v; }
  bool is_gate() const { return kind == SKind::gate || kind == SKind::raw_gate; }

  friend bool operator==(const SNode&, const SNode&) = default;
};

inline std::size_t node_count(const SNode& n) {
  std::size_t c = 1;
  if (n.kind == SKind::pow) ++c;  // exponent literal
  if (n.is_gate()) c += 2;        // Pos and Thr terminals
  for (const auto& k : n.kids) c += node_count(k);
  return c;
}

inline std::size_t gate_count(const SNode& n) {
  std::size_t c = n.is_gate() ? 1 : 0;
  for (const auto& k : n.kids) c += gate_count(k);
  return c;
}

namespace detail {

inline SNode from_prefix(const Expression& e, std::size_t& i) {
  const Node& n = e.nodes.at(i++);
  switch (n.kind) {
    case NodeKind::feature: return SNode::feat(n.feature);
    case NodeKind::constant: return SNode::constant(n.value);
    default: break;
  }
  if (n.kind != NodeKind::primitive) throw std::invalid_argument("unexpected terminal in Feat slot");
  auto kid = [&] { return from_prefix(e, i); };
  switch (n.op) {
    case Op::add: { auto a = kid(); auto b = kid(); return SNode::make(SKind::add, {a, b}); }
    case Op::sub: { auto a = kid(); auto b = kid(); return SNode::make(SKind::sub, {a, b}); }
    case Op::mul: { auto a = kid(); auto b = kid(); return SNode::make(SKind::mul, {a, b}); }
    case Op::div: { auto a = kid(); auto b = kid(); return SNode::make(SKind::div, {a, b}); }
    case Op::sqrt: return SNode::make(SKind::sqrt, {kid()});
    case Op::log: return SNode::make(SKind::log, {kid()});
    case Op::exp: return SNode::make(SKind::exp, {kid()});
    case Op::inv: return SNode::make(SKind::inv, {kid()});
    case Op::pow: {
      SNode p = SNode::make(SKind::pow, {kid()});
      p.exponent = static_cast<int>(e.nodes.at(i++).value);
      return p;
    }
    default: break;
  }
  SNode g(SKind::raw_gate);
  g.op = n.op;
  const int inputs = primitive(n.op).gated_inputs();
  for (int k = 0; k < inputs; ++k) g.kids.push_back(kid());
  g.a_tilde = e.nodes.at(i++).value;
  g.b = e.nodes.at(i++).value;
  return g;
}

inline std::vector<double> eval_node(const SNode& n, const Dataset& d) {
  const std::size_t R = d.rows();
  std::vector<double> out(R);
  switch (n.kind) {
    case SKind::constant: std::fill(out.begin(), out.end(), n.value); return out;
    case SKind::feature: return d.columns.at(static_cast<std::size_t>(n.feature));
    default: break;
  }
  std::vector<std::vector<double>> in;
  in.reserve(n.kids.size());
  for (const auto& k : n.kids) in.push_back(eval_node(k, d));
  const double a = softplus(n.a_tilde);
  for (std::size_t r = 0; r < R; ++r) {
    double v = 0.0;
    switch (n.kind) {
      case SKind::add: v = in[0][r]; for (std::size_t k = 1; k < in.size(); ++k) v += in[k][r]; break;
      case SKind::mul: v = in[0][r]; for (std::size_t k = 1; k < in.size(); ++k) v *= in[k][r]; break;
      case SKind::sub: v = in[0][r] - in[1][r]; break;
      case SKind::div: v = protected_div(in[0][r], in[1][r]); break;
      case SKind::sqrt: v = protected_sqrt(in[0][r]); break;
      case SKind::log: v = protected_log(in[0][r]); break;
      case SKind::exp: v = std::exp(in[0][r]); break;
      case SKind::inv: v = protected_inv(in[0][r]); break;
      case SKind::pow: v = int_pow(in[0][r], n.exponent); break;
      case SKind::gate: v = lgo_hard(in[0][r], a, n.b); break;
      case SKind::raw_gate:
        switch (n.op) {
          case Op::lgo: v = lgo_soft(in[0][r], a, n.b); break;
          case Op::gate_expr: v = gate_expr(in[0][r], a, n.b); break;
          case Op::lgo_thre: v = lgo_hard(in[0][r], a, n.b); break;
          case Op::lgo_pair: v = lgo_pair(in[0][r], in[1][r], a, n.b); break;
          case Op::lgo_and2: v = lgo_and2(in[0][r], in[1][r], a, n.b); break;
          case Op::lgo_or2: v = lgo_or2(in[0][r], in[1][r], a, n.b); break;
          case Op::lgo_and3: v = lgo_and3(in[0][r], in[1][r], in[2][r], a, n.b); break;
          default: throw std::logic_error("raw_gate holds a non-gate op");
        }
        break;
      default: break;
    }
    out[r] = v;
  }
  return out;
}

inline const char* skind_name(SKind k) {
  switch (k) {
    case SKind::constant: return "const";
    case SKind::feature: return "feature";
    case SKind::add: return "add";
    case SKind::mul: return "mul";
    case SKind::sub: return "sub";
    case SKind::div: return "div";
    case SKind::sqrt: return "sqrt";
    case SKind::log: return "log";
    case SKind::exp: return "exp";
    case SKind::inv: return "inv";
    case SKind::pow: return "pow";
    case SKind::gate: return "gate";
    case SKind::raw_gate: return "raw_gate";
  }
  return "?";
}

inline void print_snode(const SNode& n, const FeatureNames& names, std::string& out) {
  switch (n.kind) {
    case SKind::constant: out += format_number(n.value); return;
    case SKind::feature: out += names.at(static_cast<std::size_t>(n.feature)); return;
    default: break;
  }
  out += n.kind == SKind::raw_gate ? std::string(primitive(n.op).name) : skind_name(n.kind);
  out += '(';
  for (std::size_t k = 0; k < n.kids.size(); ++k) {
    if (k) out += ',';
    print_snode(n.kids[k], names, out);
  }
  if (n.kind == SKind::pow) out += "," + std::to_string(n.exponent);
  if (n.is_gate()) out += "," + format_number(n.a_tilde) + "," + format_number(n.b);
  out += ')';
}

}  // namespace detail

inline SNode to_snode(const Expression& e) {
  std::size_t i = 0;
  SNode n = detail::from_prefix(e, i);
  if (i != e.size()) throw std::invalid_argument("trailing nodes in expression");
  return n;
}

inline std::vector<double> evaluate(const SNode& n, const Dataset& d) { return detail::eval_node(n, d); }

/// Canonical string with full-precision parameters, e.g.
/// "add(0.5,gate(x1,1.2,-0.3))".
inline std::string print_snode(const SNode& n, const FeatureNames& names) {
  std::string out;
  detail::print_snode(n, names, out);
  return out;
}

// ---------------------------------------------------------------------------
// Interval bounds used by the guarded rewrites

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool nonneg() const { return lo >= 0.0; }
  bool within(double a, double b) const { return lo >= a && hi <= b; }
};

inline Interval bounds(const SNode& n) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const Interval full{};
  auto safe = [&](double lo, double hi) {
    if (std::isnan(lo) || std::isnan(hi)) return full;
    return Interval{lo, hi};
  };
  switch (n.kind) {
    case SKind::constant: return {n.value, n.value};
    case SKind::feature: return full;
    case SKind::gate: return {0.0, 1.0};
    default: break;
  }
  std::vector<Interval> k;
  for (const auto& c : n.kids) k.push_back(bounds(c));
  switch (n.kind) {
    case SKind::add: {
      double lo = 0.0, hi = 0.0;
      for (const auto& i : k) { lo += i.lo; hi += i.hi; }
      return safe(lo, hi);
    }
    case SKind::sub: return safe(k[0].lo - k[1].hi, k[0].hi - k[1].lo);
    case SKind::mul: {
      Interval acc = k[0];
      for (std::size_t j = 1; j < k.size(); ++j) {
        const std::array<double, 4> p{acc.lo * k[j].lo, acc.lo * k[j].hi, acc.hi * k[j].lo, acc.hi * k[j].hi};
        if (std::any_of(p.begin(), p.end(), [](double v) { return std::isnan(v); })) return full;
        acc = {*std::min_element(p.begin(), p.end()), *std::max_element(p.begin(), p.end())};
      }
      return acc;
    }
    case SKind::sqrt: {
      const double m = std::max(std::abs(k[0].lo), std::abs(k[0].hi));
      const double lo = (k[0].lo <= 0.0 && k[0].hi >= 0.0) ? 0.0 : std::sqrt(std::min(std::abs(k[0].lo), std::abs(k[0].hi)));
      return {lo, std::sqrt(m)};
    }
    case SKind::log: return {protected_log(k[0].lo), protected_log(k[0].hi)};
    case SKind::exp: return {std::exp(k[0].lo), std::exp(k[0].hi)};
    case SKind::inv:
      if (k[0].lo >= kProtectEps) return {1.0 / k[0].hi, 1.0 / k[0].lo};
      return full;
    case SKind::pow: {
      const int e = n.exponent;
      if (e < 0) return full;
      if (e == 0) return {1.0, 1.0};
      const double plo = int_pow(k[0].lo, e), phi = int_pow(k[0].hi, e);
      if (e % 2 == 1) return safe(plo, phi);
      const bool straddles = k[0].lo <= 0.0 && k[0].hi >= 0.0;
      return safe(straddles ? 0.0 : std::min(plo, phi), std::max(plo, phi));
    }
    case SKind::raw_gate:
      if (n.op == Op::lgo_thre) return {0.0, 1.0};
      if ((n.op == Op::lgo || n.op == Op::gate_expr) && k[0].nonneg()) return {0.0, k[0].hi};
      return full;
    default: return {-inf, inf};
  }
}

// ---------------------------------------------------------------------------
// Rewrite stages. Each returns true when it changed the tree.

namespace rewrite {

inline bool fold_constants(SNode& n) {
  bool changed = false;
  for (auto& k : n.kids) changed |= fold_constants(k);
  if (n.kind == SKind::constant) {
    if (n.value != 0.0 && std::abs(n.value) < std::numeric_limits<double>::min()) {
      n.value = 0.0;  // denormal
      return true;
    }
    return changed;
  }
  if (n.kind == SKind::feature) return changed;
  const bool all_const = std::all_of(n.kids.begin(), n.kids.end(), [](const SNode& k) { return k.kind == SKind::constant; });
  if (all_const) {
    Dataset one;
    one.y = {0.0};
    const double v = detail::eval_node(n, one)[0];
    if (std::isfinite(v)) {
      n = SNode::constant(v);
      return true;
    }
    return changed;
  }
  if (n.kind == SKind::add || n.kind == SKind::mul) {
    // combine constant operands of an n-ary node into one
    std::vector<SNode> consts, rest;
    for (auto& k : n.kids) (k.kind == SKind::constant ? consts : rest).push_back(std::move(k));
    if (consts.size() >= 2) {
      double v = consts[0].value;
      for (std::size_t j = 1; j < consts.size(); ++j) v = n.kind == SKind::add ? v + consts[j].value : v * consts[j].value;
      if (std::isfinite(v)) {
        consts = {SNode::constant(v)};
        changed = true;
      }
    }
    n.kids = std::move(consts);
    n.kids.insert(n.kids.end(), std::make_move_iterator(rest.begin()), std::make_move_iterator(rest.end()));
  }
  return changed;
}

/// add(x,0)->x, mul(x,1)->x, mul(x,0)->0, sub(x,0)->x, div(x,1)->x,
/// pow(x,1)->x, pow(x,0)->1.
inline bool remove_neutral(SNode& n) {
  bool changed = false;
  for (auto& k : n.kids) changed |= remove_neutral(k);
  auto collapse_single = [&] {
    if (n.kids.size() == 1) {
      SNode only = std::move(n.kids[0]);
      n = std::move(only);
    }
  };
  switch (n.kind) {
    case SKind::add: {
      const auto before = n.kids.size();
      std::erase_if(n.kids, [](const SNode& k) { return k.is_constant(0.0); });
      if (n.kids.empty()) n.kids.push_back(SNode::constant(0.0));
      changed |= n.kids.size() != before;
      if (n.kids.size() == 1) { collapse_single(); changed = true; }
      return changed;
    }
    case SKind::mul: {
      if (std::any_of(n.kids.begin(), n.kids.end(), [](const SNode& k) { return k.is_constant(0.0); })) {
        n = SNode::constant(0.0);
        return true;
      }
      const auto before = n.kids.size();
      std::erase_if(n.kids, [](const SNode& k) { return k.is_constant(1.0); });
      if (n.kids.empty()) n.kids.push_back(SNode::constant(1.0));
      changed |= n.kids.size() != before;
      if (n.kids.size() == 1) { collapse_single(); changed = true; }
      return changed;
    }
    case SKind::sub:
    case SKind::div:
      if (n.kids[1].is_constant(n.kind == SKind::sub ? 0.0 : 1.0)) {
        n.kids.pop_back();
        collapse_single();
        return true;
      }
      return changed;
    case SKind::pow:
      if (n.exponent == 1) {
        collapse_single();
        return true;
      }
      if (n.exponent == 0) {
        n = SNode::constant(1.0);
        return true;
      }
      return changed;
    default:
      return changed;
  }
}

/// sqrt(pow(x,2))->x for x >= 0; log(exp x)->x and exp(log x)->x where the
/// protected domains make them exact.
inline bool guarded_identities(SNode& n) {
  bool changed = false;
  for (auto& k : n.kids) changed |= guarded_identities(k);
  auto lift = [&](SNode inner) {
    n = std::move(inner);
    return true;
  };
  if (n.kind == SKind::sqrt && n.kids[0].kind == SKind::pow && n.kids[0].exponent == 2 && bounds(n.kids[0].kids[0]).nonneg())
    return lift(std::move(n.kids[0].kids[0]));
  if (n.kind == SKind::log && n.kids[0].kind == SKind::exp && bounds(n.kids[0].kids[0]).within(-27.0, 700.0))
    return lift(std::move(n.kids[0].kids[0]));
  if (n.kind == SKind::exp && n.kids[0].kind == SKind::log && bounds(n.kids[0].kids[0]).lo >= kProtectEps)
    return lift(std::move(n.kids[0].kids[0]));
  return changed;
}

namespace detail_sort {
inline int kind_rank(const SNode& n) { return static_cast<int>(n.kind); }
inline std::string name_of(const SNode& n, const FeatureNames& names) {
  if (n.kind == SKind::feature) return names.at(static_cast<std::size_t>(n.feature));
  if (n.kind == SKind::raw_gate) return std::string(primitive(n.op).name);
  return lgo::detail::skind_name(n.kind);
}
}  // namespace detail_sort

/// Splices nested add/mul into their parent and sorts commutative operands
/// by (kind, name, serialized form).
inline bool flatten_and_sort(SNode& n, const FeatureNames& names) {
  bool changed = false;
  for (auto& k : n.kids) changed |= flatten_and_sort(k, names);
  if (n.kind != SKind::add && n.kind != SKind::mul) return changed;
  std::vector<SNode> flat;
  for (auto& k : n.kids) {
    if (k.kind == n.kind) {
      changed = true;
      for (auto& g : k.kids) flat.push_back(std::move(g));
    } else {
      flat.push_back(std::move(k));
    }
  }
  using Key = std::tuple<int, std::string, std::string>;
  std::vector<std::pair<Key, SNode>> keyed;
  for (auto& k : flat)
    keyed.emplace_back(Key{detail_sort::kind_rank(k), detail_sort::name_of(k, names), print_snode(k, names)}, std::move(k));
  const bool sorted = std::is_sorted(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  if (!sorted) {
    std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    changed = true;
  }
  n.kids.clear();
  for (auto& [key, k] : keyed) n.kids.push_back(std::move(k));
  return changed;
}

/// lgo(x)->gate(x)*x, lgo_thre(x)->gate(x), gate_expr(f)->gate(f)*f.
inline bool compact_gates(SNode& n) {
  bool changed = false;
  for (auto& k : n.kids) changed |= compact_gates(k);
  if (n.kind != SKind::raw_gate) return changed;
  switch (n.op) {
    case Op::lgo_thre:
      n = SNode::make_gate(std::move(n.kids[0]), n.a_tilde, n.b);
      return true;
    case Op::lgo:
    case Op::gate_expr: {
      SNode x = n.kids[0];
      SNode g = SNode::make_gate(std::move(n.kids[0]), n.a_tilde, n.b);
      n = SNode::make(SKind::mul, {std::move(g), std::move(x)});
      return true;
    }
    default:
      return changed;
  }
}

/// add(G*r1, G*r2, ...) -> G*add(r1, r2, ...) for a repeated gate G.
inline bool factor_repeated_gates(SNode& n, const FeatureNames& names) {
  bool changed = false;
  for (auto& k : n.kids) changed |= factor_repeated_gates(k, names);
  if (n.kind != SKind::add) return changed;
  auto gate_factors = [&](const SNode& term) {
    std::vector<std::string> out;
    if (term.kind == SKind::gate) out.push_back(print_snode(term, names));
    if (term.kind == SKind::mul)
      for (const auto& f : term.kids)
        if (f.kind == SKind::gate) out.push_back(print_snode(f, names));
    return out;
  };
  std::map<std::string, int> uses;
  for (const auto& t : n.kids) {
    auto fs = gate_factors(t);
    std::sort(fs.begin(), fs.end());
    fs.erase(std::unique(fs.begin(), fs.end()), fs.end());
    for (const auto& f : fs) ++uses[f];
  }
  std::string target;
  for (const auto& [key, count] : uses)
    if (count >= 2) {
      target = key;
      break;
    }
  if (target.empty()) return changed;
  SNode gate_node;
  std::vector<SNode> factored_rest, others;
  for (auto& t : n.kids) {
    if (t.kind == SKind::gate && print_snode(t, names) == target) {
      gate_node = t;
      factored_rest.push_back(SNode::constant(1.0));
      continue;
    }
    if (t.kind == SKind::mul) {
      auto it = std::find_if(t.kids.begin(), t.kids.end(),
                             [&](const SNode& f) { return f.kind == SKind::gate && print_snode(f, names) == target; });
      if (it != t.kids.end()) {
        gate_node = *it;
        t.kids.erase(it);
        factored_rest.push_back(t.kids.size() == 1 ? std::move(t.kids[0]) : std::move(t));
        continue;
      }
    }
    others.push_back(std::move(t));
  }
  SNode product = SNode::make(SKind::mul, {std::move(gate_node), SNode::make(SKind::add, std::move(factored_rest))});
  if (others.empty()) {
    n = std::move(product);
  } else {
    others.push_back(std::move(product));
    n.kids = std::move(others);
  }
  return true;
}

}  // namespace rewrite

// ---------------------------------------------------------------------------
// Equivalence-checked pipeline

inline constexpr double kEquivalenceTol = 1e-9;
inline constexpr double kMetricRelTol = 1e-12;

struct EquivalenceCheck {
  double max_abs_dev = 0.0;
  bool pointwise_ok = true;
  bool metrics_ok = true;
  bool ok() const { return pointwise_ok && metrics_ok; }
};

namespace detail {
inline bool same_value(double a, double b, double tol) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::abs(a - b) <= tol;
}
}  // namespace detail

/// Compares predictions pointwise (< 1e-9 absolute) and the external test
/// metrics (agreement to 1e-12 relative).
inline EquivalenceCheck check_equivalence(std::span<const double> raw, std::span<const double> simp, const Dataset& z_test) {
  EquivalenceCheck c;
  for (std::size_t r = 0; r < raw.size(); ++r) {
    if (std::isfinite(raw[r]) && std::isfinite(simp[r])) {
      const double d = std::abs(raw[r] - simp[r]);
      c.max_abs_dev = std::max(c.max_abs_dev, d);
      if (!(d < kEquivalenceTol)) c.pointwise_ok = false;
    } else if (!detail::same_value(raw[r], simp[r], 0.0)) {
      c.pointwise_ok = false;
      c.max_abs_dev = std::numeric_limits<double>::infinity();
    }
  }
  if (!c.pointwise_ok) {
    c.metrics_ok = false;
    return c;
  }
  if (z_test.rows() >= 2) {
    const auto ma = compute_metrics(z_test.task, z_test.y, raw).values();
    const auto mb = compute_metrics(z_test.task, z_test.y, simp).values();
    for (std::size_t k = 0; k < ma.size(); ++k)
      if (!detail::same_value(ma[k].second, mb[k].second, kMetricRelTol * std::max(1.0, std::abs(ma[k].second))))
        c.metrics_ok = false;
  }
  return c;
}

struct SimplifyResult {
  SNode tree;
  std::string text;      // canonical form
  bool equivalent = true;  // false: a stage failed and the result is left less simplified
  std::string failed_stage;
  double max_abs_dev = 0.0;
  int passes = 0;
};

/// Applies the rewrite stages to a fixpoint, keeping each stage only when the
/// result stays numerically equivalent to `expr` on `z_test`.
inline SimplifyResult simplify(const Expression& expr, const Dataset& z_test) {
  const FeatureNames& names = z_test.feature_names;
  const std::vector<double> raw = evaluate(expr, z_test);
  SimplifyResult res;
  res.tree = to_snode(expr);
  const std::size_t max_passes = std::max<std::size_t>(expr.size(), 1);

  using Stage = std::pair<const char*, std::function<bool(SNode&)>>;
  const std::vector<Stage> stages = {
      {"fold_constants", [](SNode& n) { return rewrite::fold_constants(n); }},
      {"remove_neutral", [](SNode& n) { return rewrite::remove_neutral(n); }},
      {"guarded_identities", [](SNode& n) { return rewrite::guarded_identities(n); }},
      {"flatten_and_sort", [&](SNode& n) { return rewrite::flatten_and_sort(n, names); }},
      {"compact_gates", [](SNode& n) { return rewrite::compact_gates(n); }},
  };
  for (;;) {
    bool any = false;
    for (const auto& [name, apply] : stages) {
      SNode candidate = res.tree;
      if (!apply(candidate)) continue;
      const auto check = check_equivalence(raw, evaluate(candidate, z_test), z_test);
      if (!check.ok()) {
        res.equivalent = false;
        res.failed_stage = name;
        res.text = print_snode(res.tree, names);
        return res;
      }
      res.max_abs_dev = std::max(res.max_abs_dev, check.max_abs_dev);
      res.tree = std::move(candidate);
      any = true;
    }
    if (!any) break;
    if (++res.passes > static_cast<int>(max_passes))
      throw std::logic_error("rewrite system did not reach a fixpoint");
  }
  res.text = print_snode(res.tree, names);
  return res;
}

// ---------------------------------------------------------------------------
// Readability: near-duplicate gate merging

namespace detail {
inline void collect_feature_gates(SNode& n, std::map<int, std::vector<SNode*>>& out) {
  for (auto& k : n.kids) collect_feature_gates(k, out);
  if (n.kind == SKind::gate && n.kids[0].kind == SKind::feature) out[n.kids[0].feature].push_back(&n);
}

inline double median_sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}
}  // namespace detail

/// Gates on the same feature whose thresholds lie within `tolerance_z` of
/// each other are set to the median (a_tilde, b_z) and then factored so each
/// merged group appears once. Returns the number of gates absorbed.
inline std::size_t merge_gate_parameters(SNode& tree, double tolerance_z, const FeatureNames& names) {
  if (!(tolerance_z >= 0.0)) throw ConfigError("merge tolerance must be >= 0");
  std::map<int, std::vector<SNode*>> by_feature;
  detail::collect_feature_gates(tree, by_feature);
  std::size_t merged = 0;
  for (auto& [feature, gates] : by_feature) {
    std::stable_sort(gates.begin(), gates.end(), [](const SNode* a, const SNode* b) { return a->b < b->b; });
    std::size_t start = 0;
    while (start < gates.size()) {
      std::size_t end = start + 1;
      while (end < gates.size() && gates[end]->b - gates[start]->b < tolerance_z) ++end;
      if (end - start >= 2) {
        std::vector<double> as, bs;
        for (std::size_t j = start; j < end; ++j) {
          as.push_back(gates[j]->a_tilde);
          bs.push_back(gates[j]->b);
        }
        const double a_med = detail::median_sorted(as), b_med = detail::median_sorted(bs);
        for (std::size_t j = start; j < end; ++j) {
          gates[j]->a_tilde = a_med;
          gates[j]->b = b_med;
        }
        merged += end - start - 1;
      }
      start = end;
    }
  }
  if (merged > 0) {
    while (rewrite::factor_repeated_gates(tree, names)) {
      rewrite::fold_constants(tree);
      rewrite::remove_neutral(tree);
      rewrite::flatten_and_sort(tree, names);
    }
  }
  return merged;
}

struct MergeResult {
  SNode tree;
  std::size_t merged = 0;
  bool rolled_back = false;
  double max_abs_dev = 0.0;
};

/// Merging with the same equivalence gate as simplify(): a merge that moves
/// any prediction by 1e-9 or more is rolled back and flagged.
inline MergeResult merge_near_duplicate_gates(const SNode& tree, double tolerance_z, const Dataset& z_test) {
  MergeResult r;
  r.tree = tree;
  SNode candidate = tree;
  const std::size_t merged = merge_gate_parameters(candidate, tolerance_z, z_test.feature_names);
  if (merged == 0) return r;
  const auto check = check_equivalence(evaluate(tree, z_test), evaluate(candidate, z_test), z_test);
  r.max_abs_dev = check.max_abs_dev;
  if (!check.ok()) {
    r.rolled_back = true;
    return r;
  }
  r.tree = std::move(candidate);
  r.merged = merged;
  return r;
}

// ---------------------------------------------------------------------------
// Display

/// Decimal places for thresholds shown in natural units.
inline int unit_precision(std::string_view unit) {
  if (unit == "mmHg" || unit == "mmol/L") return 1;
  if (unit == "mg/dL") return 0;
  return 3;
}

inline std::string format_fixed(double v, int decimals) {
  if (!std::isfinite(v)) return format_number(v);
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, decimals);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  std::string s(buf.data(), ptr);
  if (s == "-0" || (s.starts_with("-0.") && s.find_first_not_of("-0.") == std::string::npos)) s.erase(0, 1);
  return s;
}

inline std::string format_threshold(double value, std::string_view unit) {
  return format_fixed(value, unit_precision(unit));
}

namespace detail {
inline std::string format_display_constant(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 4);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return {buf.data(), ptr};
}

inline void display_node(const SNode& n, const FeatureNames& names, const std::vector<std::string>& units,
                         const FeatureStats* stats, std::string& out) {
  switch (n.kind) {
    case SKind::constant: out += format_display_constant(n.value); return;
    case SKind::feature: out += names.at(static_cast<std::size_t>(n.feature)); return;
    default: break;
  }
  auto precedence = [](const SNode& x) {
    switch (x.kind) {
      case SKind::add:
      case SKind::sub: return 1;
      case SKind::mul:
      case SKind::div: return 2;
      default: return 3;
    }
  };
  const int own = precedence(n);
  const bool infix = own < 3;
  const bool left_assoc_only = n.kind == SKind::sub || n.kind == SKind::div;
  auto join = [&](std::string_view sep) {
    for (std::size_t k = 0; k < n.kids.size(); ++k) {
      if (k) out += sep;
      const SNode& kid = n.kids[k];
      const int p = precedence(kid);
      const bool paren = infix && (p < own || (k > 0 && left_assoc_only && p == own) ||
                                   (k > 0 && kid.kind == SKind::constant && kid.value < 0.0));
      if (paren) out += '(';
      display_node(kid, names, units, stats, out);
      if (paren) out += ')';
    }
  };
  switch (n.kind) {
    case SKind::add: join(" + "); return;
    case SKind::mul: join(" * "); return;
    case SKind::sub: join(" - "); return;
    case SKind::div: join(" / "); return;
    case SKind::gate:
      if (n.kids[0].kind == SKind::feature && stats != nullptr) {
        const auto j = static_cast<std::size_t>(n.kids[0].feature);
        const std::string unit = j < units.size() ? units[j] : "";
        out += "gate(" + names.at(j) + " > " + format_threshold(invert_threshold(n.b, j, *stats), unit);
        if (!unit.empty() && unit != "(std)") out += " " + unit;
        out += ")";
      } else {
        out += "gate(";
        display_node(n.kids[0], names, units, stats, out);
        out += " > " + format_fixed(n.b, 3) + " [z])";
      }
      return;
    default: break;
  }
  out += n.kind == SKind::raw_gate ? std::string(primitive(n.op).name) : skind_name(n.kind);
  out += '(';
  join(", ");
  if (n.kind == SKind::pow) out += ", " + std::to_string(n.exponent);
  if (n.kind == SKind::raw_gate) out += "; b_z=" + format_fixed(n.b, 3);
  out += ')';
}
}  // namespace detail

/// Human-readable form. Thresholds of gates on raw features are shown in
/// natural units at unit-specific precision; evaluation is unaffected.
inline std::string display_format(const SNode& tree, const FeatureNames& names, const std::vector<std::string>& units,
                                  const FeatureStats* stats = nullptr) {
  std::string out;
  detail::display_node(tree, names, units, stats, out);
  return out;
}

}  // namespace lgo
