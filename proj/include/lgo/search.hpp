// Typed genetic-programming search: ramped half-and-half initialisation,
// tournament selection, subtree crossover and mutation, gate micro-mutation,
// a cross-validation proxy objective, and Pareto / top-k pooling.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lgo/data.hpp"
#include "lgo/eval.hpp"
#include "lgo/expr.hpp"
#include "lgo/ops.hpp"

namespace lgo {

using Rng = std::mt19937_64;

struct CvConfig {
  bool enabled = true;
  double weight = 0.0;
  int folds = 2;
  double subsample = 0.30;
  double warmup = 0.80;
};

struct SearchConfig {
  std::size_t pop = 800;
  std::size_t gen = 100;
  std::size_t tourn = 7;
  double p_cx = 0.8;
  double p_mut = 0.2;
  double micro_mut_prob = 0.10;
  CvConfig cv;
  int max_depth = 10;
  int init_min_depth = 1;
  int init_max_depth = 4;
  int mutation_depth = 3;
  double constant_prob = 0.25;  // share of Feat terminals that are constants
  double tie_tolerance = 0.05;  // relative loss gap treated as a tie in tournaments
  OperatorSet operator_set = OperatorSet::hard;
  std::uint64_t seed = 1;
  std::size_t top_k = 100;
  std::size_t workers = 1;
  bool record_candidates = false;

  void validate() const {
    if (pop < 2) throw ConfigError("pop must be at least 2");
    if (tourn < 1) throw ConfigError("tourn must be at least 1");
    auto prob = [](double p, const char* name) {
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
    };
    prob(p_cx, "p_cx");
    prob(p_mut, "p_mut");
    prob(micro_mut_prob, "micro_mut_prob");
    prob(cv.weight, "cv.weight");
    prob(cv.warmup, "cv.warmup");
    if (!(cv.subsample > 0.0 && cv.subsample <= 1.0)) throw ConfigError("cv.subsample must lie in (0, 1]");
    if (cv.folds < 2) throw ConfigError("cv.folds must be at least 2");
    if (max_depth < 1 || init_max_depth > max_depth || init_min_depth > init_max_depth)
      throw ConfigError("inconsistent depth limits");
    if (top_k < 1) throw ConfigError("top_k must be at least 1");
    if (!(tie_tolerance >= 0.0 && tie_tolerance < 1.0)) throw ConfigError("tie_tolerance must lie in [0, 1)");
  }
};

// ---------------------------------------------------------------------------
// Random typed trees

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline bool coin(Rng& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

/// Marks nodes that sit in a gated input slot of a feature gate (every gate
/// except gate_expr). The search keeps those slots filled with raw features.
inline std::vector<bool> feature_slots(const Expression& e) {
  std::vector<bool> out(e.size(), false);
  for (std::size_t i = 0; i < e.size(); ++i) {
    const Node& n = e.nodes[i];
    if (!n.is_gate() || n.op == Op::gate_expr) continue;
    const auto kids = e.children(i);
    const int inputs = primitive(n.op).gated_inputs();
    for (int k = 0; k < inputs; ++k) out[kids[static_cast<std::size_t>(k)]] = true;
  }
  return out;
}

/// True when every feature-gate input is a raw feature terminal.
inline bool feature_gates_well_formed(const Expression& e) {
  const auto slots = feature_slots(e);
  for (std::size_t i = 0; i < e.size(); ++i)
    if (slots[i] && e.nodes[i].kind != NodeKind::feature) return false;
  return true;
}

/// Generates typed random trees for a registry over `n_features` inputs.
/// Feature gates (lgo, lgo_thre, pair, and/or) gate raw features; gate_expr
/// gates arbitrary subexpressions.
class TreeGenerator {
 public:
  TreeGenerator(const PrimitiveRegistry& registry, std::size_t n_features, double constant_prob = 0.25)
      : registry_(registry), n_features_(n_features), constant_prob_(constant_prob) {
    if (n_features == 0) throw ConfigError("dataset has no features");
    const double terminals = static_cast<double>(n_features) + 1.0;
    terminal_ratio_ = terminals / (terminals + static_cast<double>(registry.size()));
  }

  static Node random_pos(Rng& rng) { return Node::make_pos(softplus_inverse(uniform(rng, 1.0, 5.0))); }
  static Node random_thr(Rng& rng) { return Node::make_thr(uniform(rng, -1.5, 1.5)); }

  Node random_feature(Rng& rng) const { return Node::make_feature(static_cast<int>(uniform_index(rng, n_features_))); }

  Node random_feat_terminal(Rng& rng) const {
    if (coin(rng, constant_prob_)) return Node::make_constant(uniform(rng, -2.0, 2.0));
    return Node::make_feature(static_cast<int>(uniform_index(rng, n_features_)));
  }

  /// "full" grows every branch to `height`; "grow" may stop early once
  /// `min_height` is reached.
  Expression generate(Rng& rng, TypeTag type, int min_height, int height, bool full) const {
    Expression e;
    emit(rng, e, type, 0, min_height, height, full);
    return e;
  }

  Expression ramped_half_and_half(Rng& rng, int min_height, int max_height) const {
    const int h = static_cast<int>(min_height + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(max_height - min_height + 1))));
    const bool full = coin(rng, 0.5);
    return generate(rng, TypeTag::Feat, min_height, h, full);
  }

 private:
  void emit(Rng& rng, Expression& e, TypeTag type, int depth, int min_height, int height, bool full) const {
    if (type == TypeTag::Pos) {
      e.nodes.push_back(random_pos(rng));
      return;
    }
    if (type == TypeTag::Thr) {
      e.nodes.push_back(random_thr(rng));
      return;
    }
    const bool stop = depth >= height ||
                      (!full && depth >= min_height && coin(rng, terminal_ratio_));
    if (stop) {
      e.nodes.push_back(random_feat_terminal(rng));
      return;
    }
    const Op op = registry_.ops()[uniform_index(rng, registry_.size())];
    e.nodes.push_back(Node::make_primitive(op));
    const Primitive& p = primitive(op);
    for (int k = 0; k < p.arity(); ++k) {
      if (op == Op::pow && k == 1) {
        e.nodes.push_back(Node::make_exponent(coin(rng, 0.5) ? 2 : 3));
        continue;
      }
      if (k < p.gated_inputs() && op != Op::gate_expr) {
        e.nodes.push_back(random_feature(rng));
        continue;
      }
      emit(rng, e, p.arg_types[static_cast<std::size_t>(k)], depth + 1, min_height, height, full);
    }
  }

  PrimitiveRegistry registry_;
  std::size_t n_features_;
  double constant_prob_;
  double terminal_ratio_ = 0.2;
};

// ---------------------------------------------------------------------------
// Variation operators

namespace detail {
inline std::vector<std::size_t> swappable_nodes(const Expression& e) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < e.size(); ++i)
    if (e.nodes[i].kind != NodeKind::exponent) out.push_back(i);
  return out;
}
}  // namespace detail

/// One-point subtree crossover at type-compatible slots; feature-gate inputs
/// only exchange raw features. Retries up to eight times when a child would
/// exceed `max_depth`, then returns the parents.
inline std::pair<Expression, Expression> crossover(const Expression& a, const Expression& b, Rng& rng,
                                                   int max_depth = 10) {
  const auto sites_a = detail::swappable_nodes(a);
  const auto slots_a = feature_slots(a), slots_b = feature_slots(b);
  for (int attempt = 0; attempt < 8; ++attempt) {
    const std::size_t i = sites_a[uniform_index(rng, sites_a.size())];
    const TypeTag t = a.nodes[i].type();
    const bool a_is_feature = a.nodes[i].kind == NodeKind::feature;
    std::vector<std::size_t> sites_b;
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (b.nodes[j].kind == NodeKind::exponent || b.nodes[j].type() != t) continue;
      if (slots_a[i] && b.nodes[j].kind != NodeKind::feature) continue;
      if (slots_b[j] && !a_is_feature) continue;
      sites_b.push_back(j);
    }
    if (sites_b.empty()) continue;
    const std::size_t j = sites_b[uniform_index(rng, sites_b.size())];
    Expression child_a = a.replace_subtree(i, b.subtree(j));
    Expression child_b = b.replace_subtree(j, a.subtree(i));
    if (depth(child_a) <= max_depth && depth(child_b) <= max_depth) return {std::move(child_a), std::move(child_b)};
  }
  return {a, b};
}

/// Replaces a uniformly chosen subtree with a fresh subtree of the same type
/// and height at most `subtree_depth`.
inline Expression mutate(const Expression& e, const TreeGenerator& gen, Rng& rng, int subtree_depth = 3,
                         int max_depth = 10) {
  const auto sites = detail::swappable_nodes(e);
  const auto slots = feature_slots(e);
  for (int attempt = 0; attempt < 8; ++attempt) {
    const std::size_t i = sites[uniform_index(rng, sites.size())];
    const TypeTag t = e.nodes[i].type();
    Expression fresh;
    if (slots[i])
      fresh.nodes.push_back(gen.random_feature(rng));
    else
      fresh = gen.generate(rng, t, 0, subtree_depth, false);
    Expression out = e.replace_subtree(i, fresh);
    if (depth(out) <= max_depth) return out;
  }
  return e;
}

/// Perturbs each gate's (a_tilde, b_z) with probability `prob`; thresholds are
/// re-clipped to [-3, 3].
inline Expression micro_mutate_gates(const Expression& e, double prob, Rng& rng) {
  if (prob <= 0.0) return e;
  Expression out = e;
  std::normal_distribution<double> da(0.0, 0.25), db(0.0, 0.1);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out.nodes[i].is_gate()) continue;
    if (!coin(rng, prob)) continue;
    const std::size_t p = out.gate_pos_index(i), t = out.gate_thr_index(i);
    out.nodes[p].value = std::clamp(out.nodes[p].value + da(rng), -kSoftplusClip, kSoftplusClip);
    out.nodes[t].value = clip_threshold(out.nodes[t].value + db(rng));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Objective

/// Fixed training subsample and fold assignment drawn once per run.
class CvProxy {
 public:
  CvProxy(const Dataset& z_train, const CvConfig& cfg, Rng& rng) : cfg_(cfg) {
    const std::size_t n = z_train.rows();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::size_t m = n;
    if (cfg.enabled && cfg.subsample < 1.0) {
      std::shuffle(idx.begin(), idx.end(), rng);
      m = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(cfg.subsample * static_cast<double>(n))),
                                  std::min<std::size_t>(n, 2), n);
      idx.resize(m);
      std::sort(idx.begin(), idx.end());
    }
    sample_ = z_train.select_rows(idx);
    folds_.resize(m);
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto k = static_cast<std::size_t>(std::max(cfg.folds, 1));
    for (std::size_t p = 0; p < m; ++p) folds_[perm[p]] = p % k;
  }

  const Dataset& sample() const { return sample_; }
  const std::vector<std::size_t>& folds() const { return folds_; }

  bool after_warmup(std::size_t generation, std::size_t total_generations) const {
    return static_cast<double>(generation) >= cfg_.warmup * static_cast<double>(total_generations);
  }

  /// Subsample RMSE before warm-up; afterwards a blend with the mean per-fold
  /// RMSE. Weight 0 reduces to the subsample RMSE throughout.
  double loss(Evaluator& ev, const Expression& e, bool post_warmup) const {
    const auto pred = ev.forward(e, sample_);
    const double train = rmse_of(pred, sample_.y);
    if (!cfg_.enabled || !post_warmup || cfg_.weight == 0.0 || !std::isfinite(train)) return train;
    const auto k = static_cast<std::size_t>(cfg_.folds);
    std::vector<double> ss(k, 0.0);
    std::vector<std::size_t> cnt(k, 0);
    for (std::size_t r = 0; r < pred.size(); ++r) {
      const double d = pred[r] - sample_.y[r];
      ss[folds_[r]] += d * d;
      ++cnt[folds_[r]];
    }
    double mean_fold = 0.0;
    std::size_t used = 0;
    for (std::size_t f = 0; f < k; ++f)
      if (cnt[f]) {
        mean_fold += std::sqrt(ss[f] / static_cast<double>(cnt[f]));
        ++used;
      }
    mean_fold /= static_cast<double>(std::max<std::size_t>(used, 1));
    return (1.0 - cfg_.weight) * train + cfg_.weight * mean_fold;
  }

 private:
  CvConfig cfg_;
  Dataset sample_;
  std::vector<std::size_t> folds_;
};

inline double cv_proxy_loss(const Expression& e, const Dataset& z_train, const SearchConfig& cfg, Rng& rng,
                            std::size_t generation = 0) {
  CvProxy proxy(z_train, cfg.cv, rng);
  Evaluator ev;
  return proxy.loss(ev, e, proxy.after_warmup(generation, cfg.gen));
}

// ---------------------------------------------------------------------------
// Pools

struct ParetoEntry {
  Expression expr;
  std::string key;  // canonical prefix string
  double cv_loss = std::numeric_limits<double>::infinity();
  std::size_t complexity = 0;
  double train_loss = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;
  std::size_t generation = 0;
};

inline bool dominates(const ParetoEntry& a, const ParetoEntry& b) {
  return a.cv_loss <= b.cv_loss && a.complexity <= b.complexity &&
         (a.cv_loss < b.cv_loss || a.complexity < b.complexity);
}

/// Objective order: loss, then complexity, then canonical string.
inline bool objective_less(const ParetoEntry& a, const ParetoEntry& b) {
  if (a.cv_loss != b.cv_loss) return a.cv_loss < b.cv_loss;
  if (a.complexity != b.complexity) return a.complexity < b.complexity;
  return a.key < b.key;
}

/// Non-dominated front in (cv_loss, complexity) plus a bounded archive of the
/// best distinct expressions by objective.
class ParetoPool {
 public:
  explicit ParetoPool(std::size_t top_k = 100) : top_k_(top_k) {}

  void offer(const ParetoEntry& c) {
    if (!std::isfinite(c.cv_loss)) return;
    offer_front(c);
    offer_archive(c);
  }

  /// Front sorted by complexity; one entry per (loss, complexity) point, the
  /// first one offered.
  std::vector<ParetoEntry> front() const {
    auto out = front_;
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      return a.complexity != b.complexity ? a.complexity < b.complexity : a.cv_loss < b.cv_loss;
    });
    return out;
  }

  std::vector<ParetoEntry> top() const {
    std::vector<ParetoEntry> out(archive_.begin(), archive_.end());
    return out;
  }

  std::size_t capacity() const { return top_k_; }

 private:
  struct ArchiveLess {
    bool operator()(const ParetoEntry& a, const ParetoEntry& b) const { return objective_less(a, b); }
  };

  void offer_front(const ParetoEntry& c) {
    for (const auto& f : front_)
      if (dominates(f, c) || (f.cv_loss == c.cv_loss && f.complexity == c.complexity)) return;
    std::erase_if(front_, [&](const ParetoEntry& f) { return dominates(c, f); });
    front_.push_back(c);
  }

  void offer_archive(const ParetoEntry& c) {
    if (archive_keys_.count(c.key)) return;
    if (archive_.size() >= top_k_) {
      auto worst = std::prev(archive_.end());
      if (!objective_less(c, *worst)) return;
      archive_keys_.erase(worst->key);
      archive_.erase(worst);
    }
    archive_.insert(c);
    archive_keys_.insert(c.key);
  }

  std::size_t top_k_;
  std::vector<ParetoEntry> front_;
  std::set<ParetoEntry, ArchiveLess> archive_;
  std::unordered_set<std::string> archive_keys_;
};

/// Brute-force non-dominated filter, used as an oracle for ParetoPool::front.
inline std::vector<std::pair<double, std::size_t>> nondominated_points(const std::vector<ParetoEntry>& all) {
  std::set<std::pair<double, std::size_t>> pts;
  for (const auto& c : all)
    if (std::isfinite(c.cv_loss)) pts.insert({c.cv_loss, c.complexity});
  std::vector<std::pair<double, std::size_t>> out;
  for (const auto& p : pts) {
    bool dominated = false;
    for (const auto& q : pts)
      if (q != p && q.first <= p.first && q.second <= p.second) {
        dominated = true;
        break;
      }
    if (!dominated) out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evolution

struct Individual {
  Expression expr;
  std::string key;
  double fitness = std::numeric_limits<double>::infinity();
};

/// Losses within `tie_tolerance` (relative to the larger) count as tied.
inline bool fitness_tied(double a, double b, double tie_tolerance) {
  if (a == b) return true;
  if (!std::isfinite(a) || !std::isfinite(b)) return false;
  return std::abs(a - b) <= tie_tolerance * std::max(std::abs(a), std::abs(b));
}

/// Best of `tourn` uniform draws (with replacement); ties go to lower
/// complexity, then to the earlier draw.
inline std::size_t tournament_select(const std::vector<Individual>& pop, std::size_t tourn, Rng& rng,
                                     double tie_tolerance = 0.0) {
  std::size_t best = uniform_index(rng, pop.size());
  for (std::size_t k = 1; k < tourn; ++k) {
    const std::size_t c = uniform_index(rng, pop.size());
    const auto& a = pop[c];
    const auto& b = pop[best];
    if (fitness_tied(a.fitness, b.fitness, tie_tolerance)) {
      if (a.expr.size() < b.expr.size()) best = c;
    } else if (a.fitness < b.fitness) {
      best = c;
    }
  }
  return best;
}

struct GenerationLog {
  std::size_t generation = 0;
  double best_cv_loss = 0.0;
  double median_complexity = 0.0;
  std::size_t gate_count_best = 0;
};

struct EvolveResult {
  ParetoEntry best;
  ParetoPool pool;
  std::vector<GenerationLog> log;
  std::vector<ParetoEntry> candidates;  // every evaluated individual when recorded
  std::vector<std::vector<Individual>> populations;  // only when recorded
};

namespace detail {

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Evaluates fitness for every individual. Uncached keys are evaluated
/// (possibly on several threads) and written back in index order.
inline void evaluate_population(std::vector<Individual>& pop, const CvProxy& proxy, bool post_warmup,
                                std::unordered_map<std::string, double>& cache, std::size_t workers,
                                Evaluator& main_eval) {
  std::vector<std::size_t> todo;
  std::unordered_set<std::string> queued;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    auto it = cache.find(pop[i].key);
    if (it != cache.end()) continue;
    if (queued.insert(pop[i].key).second) todo.push_back(i);
  }
  std::vector<double> results(todo.size());
  const std::size_t w = std::max<std::size_t>(1, std::min(workers, todo.size()));
  if (w <= 1) {
    for (std::size_t t = 0; t < todo.size(); ++t) results[t] = proxy.loss(main_eval, pop[todo[t]].expr, post_warmup);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t k = 0; k < w; ++k)
      threads.emplace_back([&, k] {
        Evaluator ev;
        for (std::size_t t = k; t < todo.size(); t += w) results[t] = proxy.loss(ev, pop[todo[t]].expr, post_warmup);
      });
    for (auto& th : threads) th.join();
  }
  for (std::size_t t = 0; t < todo.size(); ++t) cache.emplace(pop[todo[t]].key, results[t]);
  for (auto& ind : pop) ind.fitness = cache.at(ind.key);
}

}  // namespace detail

inline ParetoEntry make_entry(const Individual& ind, std::uint64_t seed, std::size_t generation) {
  ParetoEntry e;
  e.expr = ind.expr;
  e.key = ind.key;
  e.cv_loss = ind.fitness;
  e.complexity = complexity(ind.expr);
  e.seed = seed;
  e.generation = generation;
  return e;
}

/// Runs the generational loop on standardized training data. Deterministic
/// for a fixed (config, data); the worker count does not affect results.
inline EvolveResult evolve(const SearchConfig& cfg, const Dataset& z_train) {
  cfg.validate();
  Rng rng(cfg.seed);
  const PrimitiveRegistry registry = register_primitives(cfg.operator_set);
  const TreeGenerator gen(registry, z_train.features(), cfg.constant_prob);
  const CvProxy proxy(z_train, cfg.cv, rng);
  const auto& names = z_train.feature_names;
  std::unordered_map<std::string, double> cache;
  Evaluator ev;
  EvolveResult res{ParetoEntry{}, ParetoPool(cfg.top_k), {}, {}, {}};

  auto keyed = [&](Expression e) {
    Individual ind;
    ind.key = print_expr(e, names);
    ind.expr = std::move(e);
    return ind;
  };

  std::vector<Individual> pop;
  pop.reserve(cfg.pop);
  for (std::size_t i = 0; i < cfg.pop; ++i)
    pop.push_back(keyed(gen.ramped_half_and_half(rng, cfg.init_min_depth, cfg.init_max_depth)));

  bool phase = proxy.after_warmup(0, cfg.gen);
  detail::evaluate_population(pop, proxy, phase, cache, cfg.workers, ev);

  auto record = [&](const std::vector<Individual>& p, std::size_t g) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      ParetoEntry e = make_entry(p[i], cfg.seed, g);
      res.pool.offer(e);
      if (cfg.record_candidates) res.candidates.push_back(std::move(e));
    }
    if (cfg.record_candidates) res.populations.push_back(p);
    std::size_t best = 0;
    std::vector<double> cx;
    for (std::size_t i = 0; i < p.size(); ++i) {
      cx.push_back(static_cast<double>(p[i].expr.size()));
      if (p[i].fitness < p[best].fitness ||
          (p[i].fitness == p[best].fitness && p[i].expr.size() < p[best].expr.size()))
        best = i;
    }
    res.log.push_back({g, p[best].fitness, detail::median_of(cx), gate_count(p[best].expr)});
    return best;
  };

  std::size_t best = record(pop, 0);

  for (std::size_t g = 1; g <= cfg.gen; ++g) {
    const bool now = proxy.after_warmup(g, cfg.gen);
    if (now != phase) {
      cache.clear();
      phase = now;
    }
    std::vector<Expression> off;
    off.reserve(cfg.pop - 1);
    for (std::size_t i = 0; i + 1 < cfg.pop; ++i) off.push_back(pop[tournament_select(pop, cfg.tourn, rng, cfg.tie_tolerance)].expr);
    for (std::size_t i = 0; i + 1 < off.size(); i += 2)
      if (coin(rng, cfg.p_cx)) std::tie(off[i], off[i + 1]) = crossover(off[i], off[i + 1], rng, cfg.max_depth);
    for (auto& e : off)
      if (coin(rng, cfg.p_mut)) e = mutate(e, gen, rng, cfg.mutation_depth, cfg.max_depth);
    for (auto& e : off) e = micro_mutate_gates(e, cfg.micro_mut_prob, rng);

    std::vector<Individual> next;
    next.reserve(cfg.pop);
    next.push_back(pop[best]);
    for (auto& e : off) next.push_back(keyed(std::move(e)));
    detail::evaluate_population(next, proxy, phase, cache, cfg.workers, ev);
    pop = std::move(next);
    best = record(pop, g);
  }

  auto top = res.pool.top();
  if (top.empty()) {
    res.best = make_entry(pop[best], cfg.seed, cfg.gen);
  } else {
    res.best = top.front();
  }
  return res;
}

}  // namespace lgo
