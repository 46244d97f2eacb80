#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lrl/abstraction.hpp"
#include "lrl/dataset.hpp"
#include "lrl/errors.hpp"

namespace lrl {

struct RunConfig {
  std::uint64_t seed = 1;
  std::size_t epochs = 60;
  std::size_t batch_size = 16;
  double lr = 0.01;
  double momentum = 0.9;
  std::size_t lr_step = 0;  // epochs between decays, 0 keeps lr constant
  double lr_gamma = 0.5;
  double alpha1 = 0.01;
  double alpha2 = 0.01;
  std::size_t threads = 1;
  std::string data;         // dataset file; empty means synthetic
  SynthSpec synth;           // synth.points is ignored; `points` applies to both sources
  std::size_t points = 1024;
  double test_fraction = 0.2;
  ModelConfig model;

  bool operator==(const RunConfig& o) const { return to_text() == o.to_text(); }

  std::string to_text() const;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ArgumentError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(out)) {
    throw ArgumentError(key + ": expected a finite number, got '" + v + "'");
  }
  return out;
}

inline bool to_switch(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ArgumentError(key + ": expected on|off, got '" + v + "'");
}

inline std::vector<std::size_t> to_widths(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    const auto w = to_u64(key, t);
    if (w == 0) throw ArgumentError(key + ": widths must be positive");
    out.push_back(static_cast<std::size_t>(w));
  }
  if (out.empty()) throw ArgumentError(key + ": expected a comma-separated width list");
  return out;
}

inline std::string widths_text(const std::vector<std::size_t>& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "," : "") + std::to_string(w[i]);
  return s;
}

inline std::string num_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Splits "layer2.csm_sim" into (1, "csm_sim"); returns false for other keys.
inline bool split_layer_key(const std::string& key, std::size_t& layer, std::string& field) {
  if (key.rfind("layer", 0) != 0) return false;
  const auto dot = key.find('.');
  if (dot == std::string::npos || dot == 5) return false;
  const std::string num = key.substr(5, dot - 5);
  if (num.find_first_not_of("0123456789") != std::string::npos) return false;
  const auto n = std::stoul(num);
  if (n == 0) return false;
  layer = n - 1;
  field = key.substr(dot + 1);
  return true;
}

}  // namespace detail

/// Per-layer keys that only touch CSM/RUM placement; the ablation grid may set these.
inline bool is_module_field(const std::string& field) {
  static const char* names[] = {"csm", "csm_sim", "csm_u", "csm_k", "rum", "rum_agg", "rum_shells",
                                "rum_max_neighbors", "rum_scale"};
  for (const char* n : names)
    if (field == n) return true;
  return false;
}

/// Applies one `key = value` pair. Unknown keys and bad values throw ArgumentError.
inline void set_config_value(RunConfig& c, const std::string& key, const std::string& v) {
  using detail::to_double;
  using detail::to_switch;
  using detail::to_u64;
  std::size_t layer = 0;
  std::string f;
  if (detail::split_layer_key(key, layer, f)) {
    if (layer >= c.model.layers.size()) {
      throw ArgumentError(key + ": the model has " + std::to_string(c.model.layers.size()) + " set abstraction layers");
    }
    LayerConfig& lc = c.model.layers[layer];
    if (f == "centers") lc.n_centers = to_u64(key, v);
    else if (f == "radius") lc.radius = to_double(key, v);
    else if (f == "k") lc.k = to_u64(key, v);
    else if (f == "mlp") lc.mlp = detail::to_widths(key, v);
    else if (f == "csm") lc.csm.variant = parse_csm_variant(v);
    else if (f == "csm_sim") lc.csm.sim = parse_similarity(v);
    else if (f == "csm_u") lc.csm.u = to_u64(key, v);
    else if (f == "csm_k") lc.csm.k = to_u64(key, v);
    else if (f == "rum") lc.rum.variant = parse_rum_variant(v);
    else if (f == "rum_agg") lc.rum.agg = parse_aggregation(v);
    else if (f == "rum_shells") lc.rum.shells = to_u64(key, v);
    else if (f == "rum_max_neighbors") lc.rum.max_neighbors = to_u64(key, v);
    else if (f == "rum_scale") lc.rum.scale_by_radius = to_switch(key, v);
    else throw ArgumentError("unknown config key '" + key + "'");
    return;
  }
  if (key == "seed") c.seed = to_u64(key, v);
  else if (key == "epochs") c.epochs = to_u64(key, v);
  else if (key == "batch_size") c.batch_size = to_u64(key, v);
  else if (key == "lr") c.lr = to_double(key, v);
  else if (key == "momentum") c.momentum = to_double(key, v);
  else if (key == "lr_step") c.lr_step = to_u64(key, v);
  else if (key == "lr_gamma") c.lr_gamma = to_double(key, v);
  else if (key == "alpha1") c.alpha1 = to_double(key, v);
  else if (key == "alpha2") c.alpha2 = to_double(key, v);
  else if (key == "threads") c.threads = to_u64(key, v);
  else if (key == "data") c.data = v;
  else if (key == "points") c.points = to_u64(key, v);
  else if (key == "test_fraction") c.test_fraction = to_double(key, v);
  else if (key == "synth.classes") c.synth.classes = to_u64(key, v);
  else if (key == "synth.per_class") c.synth.per_class = to_u64(key, v);
  else if (key == "synth.noise") c.synth.noise = to_double(key, v);
  else if (key == "synth.clutter") c.synth.clutter = to_switch(key, v);
  else if (key == "global.mlp") c.model.global_mlp = detail::to_widths(key, v);
  else if (key == "head.mlp") c.model.head = detail::to_widths(key, v);
  else throw ArgumentError("unknown config key '" + key + "'");
}

inline void validate_run_config(const RunConfig& c) {
  if (c.batch_size == 0) throw ArgumentError("batch_size must be positive");
  if (!(c.lr > 0.0)) throw ArgumentError("lr must be positive");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw ArgumentError("momentum must lie in [0, 1)");
  if (!(c.lr_gamma > 0.0)) throw ArgumentError("lr_gamma must be positive");
  if (c.alpha1 < 0.0 || c.alpha2 < 0.0) throw ArgumentError("loss weights must be non-negative");
  if (c.threads == 0) throw ArgumentError("threads must be positive");
  if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) throw ArgumentError("test_fraction must lie in (0, 1)");
  if (c.data.empty()) {
    SynthSpec s = c.synth;
    s.points = c.points;
    s.validate();
  }
  c.model.validate();
}

/// Parses flat `key = value` text; `#` starts a comment. Errors carry the line number.
inline RunConfig parse_config(const std::string& text, RunConfig base = {}) {
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config line " + std::to_string(line_no) + ": expected 'key = value'", line_no);
    }
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ParseError("config line " + std::to_string(line_no) + ": empty key or value", line_no);
    }
    try {
      set_config_value(base, key, value);
    } catch (const std::invalid_argument& e) {
      throw ParseError("config line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return base;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

inline std::string RunConfig::to_text() const {
  using detail::num_text;
  std::ostringstream os;
  os << "seed = " << seed << '\n'
     << "epochs = " << epochs << '\n'
     << "batch_size = " << batch_size << '\n'
     << "lr = " << num_text(lr) << '\n'
     << "momentum = " << num_text(momentum) << '\n'
     << "lr_step = " << lr_step << '\n'
     << "lr_gamma = " << num_text(lr_gamma) << '\n'
     << "alpha1 = " << num_text(alpha1) << '\n'
     << "alpha2 = " << num_text(alpha2) << '\n'
     << "threads = " << threads << '\n';
  if (!data.empty()) os << "data = " << data << '\n';
  os << "points = " << points << '\n'
     << "test_fraction = " << num_text(test_fraction) << '\n'
     << "synth.classes = " << synth.classes << '\n'
     << "synth.per_class = " << synth.per_class << '\n'
     << "synth.noise = " << num_text(synth.noise) << '\n'
     << "synth.clutter = " << (synth.clutter ? "on" : "off") << '\n';
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const LayerConfig& lc = model.layers[l];
    const std::string p = "layer" + std::to_string(l + 1) + ".";
    os << p << "centers = " << lc.n_centers << '\n'
       << p << "radius = " << num_text(lc.radius) << '\n'
       << p << "k = " << lc.k << '\n'
       << p << "mlp = " << detail::widths_text(lc.mlp) << '\n'
       << p << "csm = " << to_string(lc.csm.variant) << '\n'
       << p << "csm_sim = " << to_string(lc.csm.sim) << '\n'
       << p << "csm_u = " << lc.csm.u << '\n'
       << p << "csm_k = " << lc.csm.k << '\n'
       << p << "rum = " << to_string(lc.rum.variant) << '\n'
       << p << "rum_agg = " << to_string(lc.rum.agg) << '\n'
       << p << "rum_shells = " << lc.rum.shells << '\n'
       << p << "rum_max_neighbors = " << lc.rum.max_neighbors << '\n'
       << p << "rum_scale = " << (lc.rum.scale_by_radius ? "on" : "off") << '\n';
  }
  os << "global.mlp = " << detail::widths_text(model.global_mlp) << '\n'
     << "head.mlp = " << detail::widths_text(model.head) << '\n';
  return os.str();
}

}  // namespace lrl
