// Synthetic benchmarks with known natural-unit thresholds.
#pragma once

#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lgo/data.hpp"
#include "lgo/expr.hpp"

namespace lgo {

enum class SynthKind { step1d, two_gate, and2, smooth };

inline SynthKind parse_synth_kind(std::string_view s) {
  if (s == "step1d") return SynthKind::step1d;
  if (s == "two_gate") return SynthKind::two_gate;
  if (s == "and2") return SynthKind::and2;
  if (s == "smooth") return SynthKind::smooth;
  throw ConfigError("unknown synthetic kind '" + std::string(s) + "' (expected step1d, two_gate, and2 or smooth)");
}

inline const char* synth_kind_name(SynthKind k) {
  switch (k) {
    case SynthKind::step1d: return "step1d";
    case SynthKind::two_gate: return "two_gate";
    case SynthKind::and2: return "and2";
    case SynthKind::smooth: return "smooth";
  }
  return "?";
}

struct SynthConfig {
  SynthKind kind = SynthKind::step1d;
  std::size_t n = 2000;
  double noise = 0.1;  // noise sd as a fraction of the signal amplitude c
  double c = 1.0;
  std::uint64_t seed = 1;
};

struct SynthThreshold {
  std::string feature;
  std::string unit;
  double value = 0.0;
};

struct SynthTruth {
  SynthConfig config;
  std::vector<std::string> features;
  std::vector<std::string> units;
  std::vector<SynthThreshold> thresholds;
  std::string formula;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["kind"] = synth_kind_name(config.kind);
    j["n"] = config.n;
    j["seed"] = config.seed;
    j["c"] = config.c;
    j["noise_sd"] = config.noise * config.c;
    j["formula"] = formula;
    j["features"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < features.size(); ++i) j["features"].push_back({{"name", features[i]}, {"unit", units[i]}});
    j["thresholds"] = nlohmann::ordered_json::array();
    for (const auto& t : thresholds)
      j["thresholds"].push_back({{"feature", t.feature}, {"unit", t.unit}, {"value", t.value}});
    return j;
  }
};

struct SynthData {
  Dataset data;
  SynthTruth truth;
};

inline constexpr double kSynthMapThreshold = 65.0;      // mmHg
inline constexpr double kSynthLactateThreshold = 2.0;   // mmol/L

/// x1 = map (mmHg) ~ U[40, 100], x2 = lactate (mmol/L) ~ U[0.5, 6].
///   step1d:   y = c 1{map > 65}            (lactate is a distractor)
///   two_gate: y = c 1{map > 65} + c 1{lactate > 2}
///   and2:     y = c 1{map > 65} 1{lactate > 2}
///   smooth:   y = c (u1^2 + 0.5 u1 u2 - u2), u1 = (map - 70) / 20, u2 = (lactate - 3) / 1.5
/// plus Gaussian noise with sd noise * c.
inline SynthData generate_synth(const SynthConfig& cfg) {
  if (cfg.n < 50) throw ConfigError("synthetic n must be at least 50");
  if (!(cfg.noise >= 0.0)) throw ConfigError("noise must be >= 0");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> map_dist(40.0, 100.0), lac_dist(0.5, 6.0);
  std::normal_distribution<double> eps(0.0, 1.0);

  SynthData out;
  Dataset& d = out.data;
  d.feature_names = {"map", "lactate"};
  d.units = {"mmHg", "mmol/L"};
  d.columns.assign(2, {});
  d.target_name = "y";
  d.task = Task::regression;
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const double x1 = map_dist(rng);
    const double x2 = lac_dist(rng);
    const double e = eps(rng) * cfg.noise * cfg.c;
    const double s1 = x1 > kSynthMapThreshold ? 1.0 : 0.0;
    const double s2 = x2 > kSynthLactateThreshold ? 1.0 : 0.0;
    double signal = 0.0;
    switch (cfg.kind) {
      case SynthKind::step1d: signal = s1; break;
      case SynthKind::two_gate: signal = s1 + s2; break;
      case SynthKind::and2: signal = s1 * s2; break;
      case SynthKind::smooth: {
        const double u1 = (x1 - 70.0) / 20.0, u2 = (x2 - 3.0) / 1.5;
        signal = u1 * u1 + 0.5 * u1 * u2 - u2;
        break;
      }
    }
    d.columns[0].push_back(x1);
    d.columns[1].push_back(x2);
    d.y.push_back(cfg.c * signal + e);
  }

  SynthTruth& t = out.truth;
  t.config = cfg;
  t.features = d.feature_names;
  t.units = d.units;
  const SynthThreshold map_thr{"map", "mmHg", kSynthMapThreshold};
  const SynthThreshold lac_thr{"lactate", "mmol/L", kSynthLactateThreshold};
  switch (cfg.kind) {
    case SynthKind::step1d:
      t.thresholds = {map_thr};
      t.formula = "c*1{map>65}";
      break;
    case SynthKind::two_gate:
      t.thresholds = {map_thr, lac_thr};
      t.formula = "c*1{map>65} + c*1{lactate>2}";
      break;
    case SynthKind::and2:
      t.thresholds = {map_thr, lac_thr};
      t.formula = "c*1{map>65}*1{lactate>2}";
      break;
    case SynthKind::smooth:
      t.formula = "c*(u1^2 + 0.5*u1*u2 - u2), u1=(map-70)/20, u2=(lactate-3)/1.5";
      break;
  }
  return out;
}

/// Anchor file whose anchors are the true thresholds.
inline std::string synth_anchors_yaml(const SynthTruth& t) {
  std::string out;
  for (std::size_t i = 0; i < t.features.size(); ++i) {
    out += t.features[i] + ":\n  unit: \"" + t.units[i] + "\"\n";
    for (const auto& thr : t.thresholds)
      if (thr.feature == t.features[i]) out += "  anchor: " + format_number(thr.value) + "\n";
    out += "  note: \"synthetic ground truth\"\n";
  }
  return out;
}

}  // namespace lgo
