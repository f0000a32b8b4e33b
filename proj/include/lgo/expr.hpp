// Strongly typed expression trees stored as flat prefix-order node arrays,
// the primitive registry, complexity, and canonical prefix serialization.
#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lgo {

enum class TypeTag : std::uint8_t { Feat, Pos, Thr };

inline const char* type_name(TypeTag t) {
  switch (t) {
    case TypeTag::Feat: return "Feat";
    case TypeTag::Pos: return "Pos";
    case TypeTag::Thr: return "Thr";
  }
  return "?";
}

enum class Op : std::uint8_t {
  add, sub, mul, div, sqrt, log, pow, exp, inv,
  lgo, lgo_thre, lgo_pair, lgo_and2, lgo_or2, lgo_and3, gate_expr,
};

inline constexpr std::size_t kOpCount = 16;

struct Primitive {
  std::string_view name;
  Op op;
  std::vector<TypeTag> arg_types;
  TypeTag return_type = TypeTag::Feat;
  double cost_weight = 1.0;
  bool is_gate = false;

  int arity() const { return static_cast<int>(arg_types.size()); }
  /// Number of Feat inputs a gate gates (arity minus the Pos and Thr slots).
  int gated_inputs() const { return is_gate ? arity() - 2 : 0; }
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, std::string token)
      : std::runtime_error(msg + " at '" + token + "'"), token_(std::move(token)) {}
  const std::string& token() const { return token_; }

 private:
  std::string token_;
};

namespace detail {

inline const std::vector<Primitive>& primitive_table() {
  using T = TypeTag;
  static const std::vector<Primitive> table = {
      {"add", Op::add, {T::Feat, T::Feat}, T::Feat, 1.0, false},
      {"sub", Op::sub, {T::Feat, T::Feat}, T::Feat, 1.0, false},
      {"mul", Op::mul, {T::Feat, T::Feat}, T::Feat, 1.0, false},
      {"div", Op::div, {T::Feat, T::Feat}, T::Feat, 1.5, false},
      {"sqrt", Op::sqrt, {T::Feat}, T::Feat, 1.5, false},
      {"log", Op::log, {T::Feat}, T::Feat, 1.5, false},
      {"pow", Op::pow, {T::Feat, T::Feat}, T::Feat, 1.5, false},
      {"exp", Op::exp, {T::Feat}, T::Feat, 1.5, false},
      {"inv", Op::inv, {T::Feat}, T::Feat, 1.5, false},
      {"lgo", Op::lgo, {T::Feat, T::Pos, T::Thr}, T::Feat, 2.0, true},
      {"lgo_thre", Op::lgo_thre, {T::Feat, T::Pos, T::Thr}, T::Feat, 2.0, true},
      {"lgo_pair", Op::lgo_pair, {T::Feat, T::Feat, T::Pos, T::Thr}, T::Feat, 2.5, true},
      {"lgo_and2", Op::lgo_and2, {T::Feat, T::Feat, T::Pos, T::Thr}, T::Feat, 2.5, true},
      {"lgo_or2", Op::lgo_or2, {T::Feat, T::Feat, T::Pos, T::Thr}, T::Feat, 2.5, true},
      {"lgo_and3", Op::lgo_and3, {T::Feat, T::Feat, T::Feat, T::Pos, T::Thr}, T::Feat, 3.0, true},
      {"gate_expr", Op::gate_expr, {T::Feat, T::Pos, T::Thr}, T::Feat, 2.0, true},
  };
  return table;
}

}  // namespace detail

inline const Primitive& primitive(Op op) {
  return detail::primitive_table()[static_cast<std::size_t>(op)];
}

/// Looks up a primitive by name, accepting the lgo_soft / lgo_hard aliases.
inline std::optional<Op> find_op(std::string_view name) {
  if (name == "lgo_soft") return Op::lgo;
  if (name == "lgo_hard") return Op::lgo_thre;
  for (const auto& p : detail::primitive_table())
    if (p.name == name) return p.op;
  return std::nullopt;
}

inline bool is_gate(Op op) { return primitive(op).is_gate; }

enum class OperatorSet { base, soft, hard };

inline OperatorSet parse_operator_set(std::string_view name) {
  if (name == "base") return OperatorSet::base;
  if (name == "soft" || name == "lgo_soft") return OperatorSet::soft;
  if (name == "hard" || name == "lgo_hard") return OperatorSet::hard;
  throw ConfigError("unknown operator set '" + std::string(name) + "' (expected base, soft or hard)");
}

inline const char* operator_set_name(OperatorSet s) {
  switch (s) {
    case OperatorSet::base: return "base";
    case OperatorSet::soft: return "soft";
    case OperatorSet::hard: return "hard";
  }
  return "?";
}

/// Experiment tag used in exports: base, lgo_soft, lgo_hard.
inline std::string experiment_name(OperatorSet s) {
  return s == OperatorSet::base ? "base" : std::string("lgo_") + operator_set_name(s);
}

class PrimitiveRegistry {
 public:
  explicit PrimitiveRegistry(std::vector<Op> ops) : ops_(std::move(ops)) {}

  std::span<const Op> ops() const { return ops_; }
  bool contains(Op op) const { return std::find(ops_.begin(), ops_.end(), op) != ops_.end(); }
  std::size_t size() const { return ops_.size(); }

  std::size_t gate_count() const {
    return static_cast<std::size_t>(std::count_if(ops_.begin(), ops_.end(), is_gate));
  }

  std::optional<Op> find(std::string_view name) const {
    auto op = find_op(name);
    if (op && contains(*op)) return op;
    return std::nullopt;
  }

 private:
  std::vector<Op> ops_;
};

inline PrimitiveRegistry register_primitives(OperatorSet set) {
  std::vector<Op> ops = {Op::add, Op::sub, Op::mul, Op::div, Op::sqrt,
                         Op::log, Op::pow, Op::exp, Op::inv};
  switch (set) {
    case OperatorSet::base:
      break;
    case OperatorSet::soft:
      ops.insert(ops.end(), {Op::lgo, Op::lgo_pair, Op::lgo_and2, Op::lgo_or2,
                             Op::lgo_and3, Op::gate_expr});
      break;
    case OperatorSet::hard:
      ops.insert(ops.end(), {Op::lgo_thre, Op::lgo_and2, Op::lgo_or2, Op::lgo_and3,
                             Op::gate_expr});
      break;
  }
  return PrimitiveRegistry(std::move(ops));
}

inline PrimitiveRegistry register_primitives(std::string_view set_name) {
  return register_primitives(parse_operator_set(set_name));
}

enum class NodeKind : std::uint8_t {
  primitive,
  feature,
  constant,  // ephemeral real constant (Feat)
  exponent,  // integer literal in the exponent slot of pow (Feat)
  pos,       // pre-softplus steepness (Pos)
  thr,       // z-space threshold (Thr)
};

struct Node {
  NodeKind kind = NodeKind::constant;
  Op op = Op::add;
  int feature = -1;
  double value = 0.0;

  static Node make_primitive(Op op) { return {NodeKind::primitive, op, -1, 0.0}; }
  static Node make_feature(int index) { return {NodeKind::feature, Op::add, index, 0.0}; }
  static Node make_constant(double v) { return {NodeKind::constant, Op::add, -1, v}; }
  static Node make_exponent(int k) { return {NodeKind::exponent, Op::add, -1, static_cast<double>(k)}; }
  static Node make_pos(double a_tilde) { return {NodeKind::pos, Op::add, -1, a_tilde}; }
  static Node make_thr(double b_z) { return {NodeKind::thr, Op::add, -1, b_z}; }

  int arity() const { return kind == NodeKind::primitive ? primitive(op).arity() : 0; }
  bool is_gate() const { return kind == NodeKind::primitive && lgo::is_gate(op); }

  TypeTag type() const {
    if (kind == NodeKind::pos) return TypeTag::Pos;
    if (kind == NodeKind::thr) return TypeTag::Thr;
    return TypeTag::Feat;
  }

  friend bool operator==(const Node& a, const Node& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
      case NodeKind::primitive: return a.op == b.op;
      case NodeKind::feature: return a.feature == b.feature;
      default: return a.value == b.value;
    }
  }
};

using FeatureNames = std::vector<std::string>;

/// Expression tree in prefix order. A gate node's last two children are its
/// Pos and Thr terminals.
struct Expression {
  std::vector<Node> nodes;

  std::size_t size() const { return nodes.size(); }
  bool empty() const { return nodes.empty(); }

  /// One past the last node of the subtree rooted at i.
  std::size_t subtree_end(std::size_t i) const {
    std::size_t need = 1;
    while (need > 0) {
      if (i >= nodes.size()) throw std::out_of_range("malformed expression");
      need += static_cast<std::size_t>(nodes[i].arity());
      --need;
      ++i;
    }
    return i;
  }

  std::vector<std::size_t> children(std::size_t i) const {
    std::vector<std::size_t> out;
    const int n = nodes[i].arity();
    std::size_t c = i + 1;
    for (int k = 0; k < n; ++k) {
      out.push_back(c);
      c = subtree_end(c);
    }
    return out;
  }

  /// Index of the Pos terminal of the gate at i.
  std::size_t gate_pos_index(std::size_t i) const { return subtree_end(i) - 2; }
  std::size_t gate_thr_index(std::size_t i) const { return subtree_end(i) - 1; }

  Expression subtree(std::size_t i) const {
    return {std::vector<Node>(nodes.begin() + static_cast<std::ptrdiff_t>(i),
                              nodes.begin() + static_cast<std::ptrdiff_t>(subtree_end(i)))};
  }

  /// Returns a copy with the subtree at i replaced by `replacement`.
  Expression replace_subtree(std::size_t i, const Expression& replacement) const {
    Expression out;
    const std::size_t end = subtree_end(i);
    out.nodes.reserve(nodes.size() - (end - i) + replacement.size());
    out.nodes.insert(out.nodes.end(), nodes.begin(), nodes.begin() + static_cast<std::ptrdiff_t>(i));
    out.nodes.insert(out.nodes.end(), replacement.nodes.begin(), replacement.nodes.end());
    out.nodes.insert(out.nodes.end(), nodes.begin() + static_cast<std::ptrdiff_t>(end), nodes.end());
    return out;
  }

  friend bool operator==(const Expression&, const Expression&) = default;
};

/// Unified complexity: every node counts, terminals and gate parameters included.
inline std::size_t complexity(const Expression& e) { return e.size(); }

/// Engine-native weighted complexity (terminals weigh 1).
inline double weighted_complexity(const Expression& e) {
  double total = 0.0;
  for (const auto& n : e.nodes)
    total += n.kind == NodeKind::primitive ? primitive(n.op).cost_weight : 1.0;
  return total;
}

/// Height in edges; a lone terminal has depth 0.
inline int depth(const Expression& e) {
  int max_depth = 0;
  std::vector<int> pending;  // remaining children per open node
  for (const auto& n : e.nodes) {
    const int d = static_cast<int>(pending.size());
    max_depth = std::max(max_depth, d);
    if (!pending.empty()) --pending.back();
    if (n.arity() > 0) pending.push_back(n.arity());
    while (!pending.empty() && pending.back() == 0) pending.pop_back();
  }
  return max_depth;
}

inline std::size_t gate_count(const Expression& e) {
  return static_cast<std::size_t>(
      std::count_if(e.nodes.begin(), e.nodes.end(), [](const Node& n) { return n.is_gate(); }));
}

inline std::vector<std::size_t> gate_indices(const Expression& e) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < e.size(); ++i)
    if (e.nodes[i].is_gate()) out.push_back(i);
  return out;
}

/// Checks typing and structural well-formedness. Returns an error message or
/// an empty string.
inline std::string type_check_message(const Expression& e, std::size_t n_features,
                                      const PrimitiveRegistry* registry = nullptr) {
  if (e.empty()) return "empty expression";
  struct Frame {
    std::size_t node;
    int next_arg;
  };
  std::vector<Frame> stack;
  auto expected_here = [&]() -> TypeTag {
    if (stack.empty()) return TypeTag::Feat;
    const auto& f = stack.back();
    return primitive(e.nodes[f.node].op).arg_types[static_cast<std::size_t>(f.next_arg)];
  };
  for (std::size_t i = 0; i < e.size(); ++i) {
    const Node& n = e.nodes[i];
    const TypeTag want = expected_here();
    if (n.type() != want)
      return "node " + std::to_string(i) + " has type " + type_name(n.type()) + ", expected " +
             type_name(want);
    const bool in_exponent_slot = !stack.empty() && e.nodes[stack.back().node].op == Op::pow &&
                                  stack.back().next_arg == 1;
    if (in_exponent_slot != (n.kind == NodeKind::exponent))
      return "node " + std::to_string(i) + ": pow exponent must be an integer literal";
    if (n.kind == NodeKind::feature && (n.feature < 0 || static_cast<std::size_t>(n.feature) >= n_features))
      return "node " + std::to_string(i) + ": feature index out of range";
    if (n.kind == NodeKind::primitive && registry && !registry->contains(n.op))
      return "node " + std::to_string(i) + ": primitive '" + std::string(primitive(n.op).name) +
             "' not in registry";
    if (!stack.empty()) ++stack.back().next_arg;
    if (n.arity() > 0) stack.push_back({i, 0});
    while (!stack.empty() && stack.back().next_arg == e.nodes[stack.back().node].arity()) stack.pop_back();
    if (stack.empty() && i + 1 != e.size()) return "trailing nodes after complete tree";
  }
  if (!stack.empty()) return "incomplete tree";
  return {};
}

inline bool type_checks(const Expression& e, std::size_t n_features,
                        const PrimitiveRegistry* registry = nullptr) {
  return type_check_message(e, n_features, registry).empty();
}

// ---------------------------------------------------------------------------
// Serialization

/// Shortest decimal form that round-trips to the same double.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf.data(), ptr);
}

namespace detail {

inline void print_node(const Expression& e, std::size_t& i, const FeatureNames& names,
                       std::string& out) {
  const Node& n = e.nodes[i++];
  switch (n.kind) {
    case NodeKind::feature:
      out += names.at(static_cast<std::size_t>(n.feature));
      return;
    case NodeKind::exponent:
      out += std::to_string(static_cast<int>(n.value));
      return;
    case NodeKind::constant:
    case NodeKind::pos:
    case NodeKind::thr:
      out += format_number(n.value);
      return;
    case NodeKind::primitive:
      break;
  }
  out += primitive(n.op).name;
  out += '(';
  for (int k = 0; k < n.arity(); ++k) {
    if (k) out += ',';
    print_node(e, i, names, out);
  }
  out += ')';
}

}  // namespace detail

/// Canonical prefix form, e.g. "add(x1,lgo_thre(x2,0.5,-1.25))".
inline std::string print_expr(const Expression& e, const FeatureNames& names) {
  std::string out;
  std::size_t i = 0;
  if (!e.empty()) detail::print_node(e, i, names, out);
  return out;
}

namespace detail {

class Parser {
 public:
  Parser(std::string_view src, const FeatureNames& names) : src_(src), names_(names) {}

  Expression run() {
    Expression e;
    parse(e, TypeTag::Feat, false);
    skip_ws();
    if (pos_ != src_.size()) throw ParseError("unexpected trailing input", std::string(src_.substr(pos_)));
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  static bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
  }

  std::string_view token() {
    skip_ws();
    const std::size_t start = pos_;
    if (pos_ < src_.size() && (src_[pos_] == '-' || src_[pos_] == '+')) ++pos_;
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      const bool exp_sign = (c == '-' || c == '+') && pos_ > start &&
                            (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E') &&
                            is_numeric_start(src_.substr(start, pos_ - start));
      if (!ident_char(c) && !exp_sign) break;
      ++pos_;
    }
    if (start == pos_) {
      const std::string bad = pos_ < src_.size() ? std::string(1, src_[pos_]) : std::string("<end>");
      throw ParseError("expected symbol or number", bad);
    }
    return src_.substr(start, pos_ - start);
  }

  static bool is_numeric_start(std::string_view t) {
    std::size_t k = 0;
    if (k < t.size() && (t[k] == '-' || t[k] == '+')) ++k;
    return k < t.size() && (std::isdigit(static_cast<unsigned char>(t[k])) || t[k] == '.');
  }

  static std::optional<double> to_number(std::string_view t) {
    if (!is_numeric_start(t)) return std::nullopt;
    if (!t.empty() && t.front() == '+') t.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) return std::nullopt;
    return v;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < src_.size() && src_[pos_] == c;
  }

  void expect(char c, std::string_view context) {
    skip_ws();
    if (pos_ >= src_.size() || src_[pos_] != c) {
      const std::string got = pos_ < src_.size() ? std::string(1, src_[pos_]) : std::string("<end>");
      throw ParseError("expected '" + std::string(1, c) + "' in " + std::string(context), got);
    }
    ++pos_;
  }

  void parse(Expression& e, TypeTag want, bool exponent_slot) {
    const std::string_view tok = token();
    const std::string tok_s(tok);
    if (auto num = to_number(tok)) {
      if (exponent_slot) {
        if (*num != std::floor(*num) || std::abs(*num) > 64)
          throw ParseError("pow exponent must be a small integer", tok_s);
        e.nodes.push_back(Node::make_exponent(static_cast<int>(*num)));
        return;
      }
      switch (want) {
        case TypeTag::Feat: e.nodes.push_back(Node::make_constant(*num)); break;
        case TypeTag::Pos: e.nodes.push_back(Node::make_pos(*num)); break;
        case TypeTag::Thr: e.nodes.push_back(Node::make_thr(*num)); break;
      }
      return;
    }
    if (peek('(')) {
      auto op = find_op(tok);
      if (!op) throw ParseError("unknown primitive", tok_s);
      if (want != TypeTag::Feat || exponent_slot)
        throw ParseError(std::string("type mismatch: primitive where ") +
                             (exponent_slot ? "integer exponent" : type_name(want)) + " expected",
                         tok_s);
      const Primitive& p = primitive(*op);
      e.nodes.push_back(Node::make_primitive(*op));
      expect('(', tok_s);
      for (int k = 0; k < p.arity(); ++k) {
        if (k) {
          if (peek(')')) throw ParseError("arity mismatch: '" + tok_s + "' expects " + std::to_string(p.arity()) + " arguments", tok_s);
          expect(',', tok_s);
        } else if (peek(')')) {
          throw ParseError("arity mismatch: '" + tok_s + "' expects " + std::to_string(p.arity()) + " arguments", tok_s);
        }
        parse(e, p.arg_types[static_cast<std::size_t>(k)], *op == Op::pow && k == 1);
      }
      if (peek(',')) throw ParseError("arity mismatch: '" + tok_s + "' expects " + std::to_string(p.arity()) + " arguments", tok_s);
      expect(')', tok_s);
      return;
    }
    auto it = std::find(names_.begin(), names_.end(), tok_s);
    if (it == names_.end()) {
      if (find_op(tok)) throw ParseError("arity mismatch: primitive used without arguments", tok_s);
      throw ParseError("unknown symbol", tok_s);
    }
    if (want != TypeTag::Feat || exponent_slot)
      throw ParseError(std::string("type mismatch: feature where ") +
                           (exponent_slot ? "integer exponent" : type_name(want)) + " expected",
                       tok_s);
    e.nodes.push_back(Node::make_feature(static_cast<int>(it - names_.begin())));
  }

  std::string_view src_;
  const FeatureNames& names_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses canonical prefix notation. Numbers in Pos/Thr slots become gate
/// parameters, numbers elsewhere become constants.
inline Expression parse_expr(std::string_view src, const FeatureNames& names) {
  return detail::Parser(src, names).run();
}

}  // namespace lgo
