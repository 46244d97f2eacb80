#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lrl/abstraction.hpp"
#include "lrl/checkpoint.hpp"
#include "lrl/config.hpp"
#include "lrl/dataset.hpp"

namespace lrl {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct EvalResult {
  double acc = 0.0;
  double macc = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::vector<std::size_t> predictions;
};

/// Overall accuracy, mean per-class accuracy over classes present, confusion matrix.
inline EvalResult metrics_from_predictions(const std::vector<std::size_t>& predicted,
                                           const std::vector<std::size_t>& truth, std::size_t num_classes) {
  if (predicted.size() != truth.size()) throw ArgumentError("metrics: prediction and label counts differ");
  EvalResult r;
  r.predictions = predicted;
  r.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= num_classes || predicted[i] >= num_classes) throw ArgumentError("metrics: class index out of range");
    ++r.confusion[truth[i]][predicted[i]];
    correct += predicted[i] == truth[i] ? 1 : 0;
  }
  if (truth.empty()) return r;
  r.acc = static_cast<double>(correct) / static_cast<double>(truth.size());
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::size_t total = 0;
    for (auto v : r.confusion[c]) total += v;
    if (total == 0) continue;
    sum += static_cast<double>(r.confusion[c][c]) / static_cast<double>(total);
    ++present;
  }
  r.macc = sum / static_cast<double>(present);
  return r;
}

inline std::size_t argmax(const Tensor& logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits.data[i] > logits.data[best]) best = i;
  return best;
}

// ---------------------------------------------------------------------------
// Per-object passes
// ---------------------------------------------------------------------------

inline std::uint64_t eval_sample_seed(std::uint64_t seed, std::size_t index) {
  return derive_seed({seed, 0xE7A1, index});
}

inline std::uint64_t train_sample_seed(std::uint64_t seed, std::size_t epoch, std::size_t index) {
  return derive_seed({seed, 0x7A1, epoch, index});
}

/// Copy of `cloud` with its rows in a seeded random order.
inline PointSet shuffled_points(const PointSet& cloud, std::uint64_t seed) {
  std::vector<std::size_t> perm(cloud.rows());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  Rng rng(seed);
  rng.shuffle(perm);
  PointSet out = Tensor::matrix(cloud.rows(), 3);
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t a = 0; a < 3; ++a) out(i, a) = cloud(perm[i], a);
  return out;
}

struct ObjectPass {
  double total = 0.0;
  double ce = 0.0;
  double fit = 0.0;
  double range = 0.0;
  double rum = 0.0;
  std::size_t predicted = 0;
  std::vector<Tensor> grads;  // aligned with Model::params().all(); empty without backward
};

inline ObjectPass run_object(const Model& model, const PointSet& cloud, std::size_t label, std::uint64_t sample_seed,
                             double alpha1, double alpha2, bool with_grad) {
  Tape tape;
  ClassifyOutput fwd = classify(tape, cloud, model, sample_seed);
  ObjectPass r;
  r.predicted = argmax(fwd.logits.value());
  LossTerms terms = assemble_loss(fwd, label, alpha1, alpha2);
  Var loss = total_loss(terms);
  r.total = loss.item();
  r.ce = terms.ce.item();
  r.fit = term_value(terms.fit_per_layer);
  r.range = term_value(terms.range_per_layer);
  r.rum = term_value(terms.rum_per_layer);
  if (!std::isfinite(r.total)) {
    const auto where = tape.first_non_finite();
    throw NumericError("non-finite loss; first non-finite tensor: " + where.value_or("none found"));
  }
  if (with_grad) {
    tape.compute_gradients(loss);
    const auto blocks = model.params().all();
    r.grads.reserve(blocks.size());
    for (const ParamBlock* b : blocks) r.grads.emplace_back(b->tensor.shape, 0.0);
    std::unordered_map<const ParamBlock*, std::size_t> pos;
    for (std::size_t i = 0; i < blocks.size(); ++i) pos.emplace(blocks[i], i);
    for (auto [p, g] : tape.param_gradients()) r.grads[pos.at(p)] = *g;
  }
  return r;
}

/// Runs f(i) for i in [0, n) on up to `threads` workers. Results must go to slot i.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& f) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  const std::size_t workers = std::min(threads, n);
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) f(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline EvalResult evaluate(const Model& model, const Dataset& ds, const std::vector<std::size_t>& indices,
                           std::uint64_t seed, std::size_t threads = 1) {
  std::vector<std::size_t> pred(indices.size()), truth(indices.size());
  parallel_for(indices.size(), threads, [&](std::size_t i) {
    const std::size_t idx = indices[i];
    Tape tape;
    pred[i] = argmax(classify(tape, ds.clouds[idx], model, eval_sample_seed(seed, idx)).logits.value());
  });
  for (std::size_t i = 0; i < indices.size(); ++i) truth[i] = ds.labels[indices[i]];
  return metrics_from_predictions(pred, truth, ds.num_classes());
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double ce = 0.0;
  double fit = 0.0;
  double range = 0.0;
  double rum = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double test_macc = 0.0;
};

inline constexpr const char* kMetricsHeader = "epoch,train_loss,ce,fit,range,rum,train_acc,test_acc,test_macc";

inline std::string metrics_row(const EpochMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.9f,%.9f,%.9f,%.9f,%.9f,%.6f,%.6f,%.6f", m.epoch, m.train_loss, m.ce, m.fit,
                m.range, m.rum, m.train_acc, m.test_acc, m.test_macc);
  return buf;
}

struct TrainResult {
  std::unique_ptr<Model> model;
  std::vector<EpochMetrics> history;
  EvalResult final_test;
};

/// Model configuration for a dataset: class count taken from the data.
inline ModelConfig model_config_for(const RunConfig& cfg, const Dataset& ds) {
  ModelConfig mc = cfg.model;
  mc.num_classes = ds.num_classes();
  return mc;
}

/// Minibatch SGD with momentum on the training split. With a non-empty `out_dir`
/// writes metrics.csv (one row per epoch, flushed as it goes), config.txt and
/// checkpoint.bin. `log` receives one line per epoch when set.
inline TrainResult train(const RunConfig& cfg, const Dataset& ds, const Split& split, const std::string& out_dir = "",
                         const std::function<void(const std::string&)>& log = {}) {
  validate_run_config(cfg);
  if (split.train.empty()) throw ArgumentError("train: empty training split");
  TrainResult res;
  res.model = std::make_unique<Model>(model_config_for(cfg, ds), cfg.seed);
  Model& model = *res.model;
  const auto blocks = model.params().all();
  std::vector<Tensor> velocity;
  for (const ParamBlock* b : blocks) velocity.emplace_back(b->tensor.shape, 0.0);

  std::ofstream csv;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream(out_dir + "/config.txt") << cfg.to_text();
    csv.open(out_dir + "/metrics.csv", std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + out_dir + "/metrics.csv");
    csv << kMetricsHeader << '\n' << std::flush;
  }

  double lr = cfg.lr;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.lr_step > 0 && epoch > 1 && (epoch - 1) % cfg.lr_step == 0) lr *= cfg.lr_gamma;
    std::vector<std::size_t> order = split.train;
    Rng order_rng(derive_seed({cfg.seed, 0x0de5, epoch}));
    order_rng.shuffle(order);

    EpochMetrics em;
    em.epoch = epoch;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t bs = std::min(cfg.batch_size, order.size() - start);
      std::vector<ObjectPass> passes(bs);
      parallel_for(bs, cfg.threads, [&](std::size_t i) {
        const std::size_t idx = order[start + i];
        const PointSet cloud = shuffled_points(ds.clouds[idx], derive_seed({cfg.seed, 0x9e0, epoch, idx}));
        passes[i] = run_object(model, cloud, ds.labels[idx], train_sample_seed(cfg.seed, epoch, idx), cfg.alpha1,
                               cfg.alpha2, true);
      });
      // Index-ordered merge keeps the update independent of the thread count.
      for (std::size_t p = 0; p < blocks.size(); ++p) {
        Tensor& g = blocks[p]->grad;
        std::fill(g.data.begin(), g.data.end(), 0.0);
        for (const ObjectPass& op : passes)
          for (std::size_t e = 0; e < g.size(); ++e) g.data[e] += op.grads[p].data[e];
        for (auto& v : g.data) v /= static_cast<double>(bs);
        Tensor& vel = velocity[p];
        for (std::size_t e = 0; e < g.size(); ++e) {
          vel.data[e] = cfg.momentum * vel.data[e] + g.data[e];
          blocks[p]->tensor.data[e] -= lr * vel.data[e];
        }
      }
      for (std::size_t i = 0; i < bs; ++i) {
        const ObjectPass& op = passes[i];
        em.train_loss += op.total;
        em.ce += op.ce;
        em.fit += op.fit;
        em.range += op.range;
        em.rum += op.rum;
        correct += op.predicted == ds.labels[order[start + i]] ? 1 : 0;
      }
    }
    const double n = static_cast<double>(order.size());
    em.train_loss /= n;
    em.ce /= n;
    em.fit /= n;
    em.range /= n;
    em.rum /= n;
    em.train_acc = static_cast<double>(correct) / n;
    if (!split.test.empty()) {
      const EvalResult ev = evaluate(model, ds, split.test, cfg.seed, cfg.threads);
      em.test_acc = ev.acc;
      em.test_macc = ev.macc;
    }
    res.history.push_back(em);
    const std::string row = metrics_row(em);
    if (csv.is_open()) csv << row << '\n' << std::flush;
    if (log) log(row);
  }
  if (!split.test.empty()) res.final_test = evaluate(model, ds, split.test, cfg.seed, cfg.threads);
  if (!out_dir.empty()) {
    const auto cblocks = std::as_const(model).params().all();
    write_checkpoint(out_dir + "/checkpoint.bin", cblocks);
  }
  return res;
}

/// Dataset named by the config, or the synthetic one it describes.
inline Dataset dataset_for(const RunConfig& cfg, std::vector<std::string>* warnings = nullptr) {
  if (!cfg.data.empty()) return load_dataset(cfg.data, cfg.points, cfg.seed, warnings);
  SynthSpec s = cfg.synth;
  s.points = cfg.points;
  return generate_synthetic(s, cfg.seed);
}

inline std::unique_ptr<Model> load_model(const RunConfig& cfg, std::size_t num_classes, const std::string& checkpoint) {
  ModelConfig mc = cfg.model;
  mc.num_classes = num_classes;
  auto model = std::make_unique<Model>(mc, cfg.seed);
  load_into(model->params(), read_checkpoint(checkpoint));
  return model;
}

// ---------------------------------------------------------------------------
// Region dumps
// ---------------------------------------------------------------------------

inline constexpr const char* kRegionHeader = "layer,center_index,cx,cy,cz,dx,dy,dz,r,dr";

/// One line per region: 1-based layer, center index, shifted center, shift, radius, radius change.
inline std::string region_dump(const std::vector<RegionRecord>& records) {
  std::ostringstream os;
  os << kRegionHeader << '\n';
  char buf[320];
  for (const RegionRecord& rec : records) {
    const Tensor& c = rec.regions.centers;
    for (std::size_t j = 0; j < rec.regions.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", rec.layer + 1, j,
                    c(j, 0), c(j, 1), c(j, 2), rec.shifts(j, 0), rec.shifts(j, 1), rec.shifts(j, 2),
                    rec.regions.radii[j], rec.radius_deltas[j]);
      os << buf;
    }
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Ablation grid
// ---------------------------------------------------------------------------

struct GridEntry {
  std::string name;
  std::vector<std::pair<std::string, std::string>> overrides;
};

/// One entry per line: `name key=value ...`; `#` starts a comment. Entries may
/// only set per-layer module keys (layerN.csm, layerN.rum_agg, ...). Setting the
/// seed is rejected because every entry must share the base seed.
inline std::vector<GridEntry> parse_grid(const std::string& text) {
  std::vector<GridEntry> out;
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    GridEntry e;
    if (!(ls >> e.name)) continue;
    auto fail = [&](const std::string& what) {
      throw ParseError("grid line " + std::to_string(line_no) + " (" + e.name + "): " + what, line_no);
    };
    for (const auto& prev : out)
      if (prev.name == e.name) fail("duplicate entry name");
    std::string tok;
    while (ls >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == tok.size()) fail("expected key=value, got '" + tok + "'");
      const std::string key = tok.substr(0, eq);
      std::size_t layer = 0;
      std::string field;
      if (key == "seed") fail("entries may not override the seed; all entries share the base seed");
      if (!detail::split_layer_key(key, layer, field) || !is_module_field(field)) {
        fail("only per-layer csm/rum keys may vary, got '" + key + "'");
      }
      e.overrides.emplace_back(key, tok.substr(eq + 1));
    }
    out.push_back(std::move(e));
  }
  if (out.empty()) throw ParseError("grid has no entries", 0);
  return out;
}

inline RunConfig apply_entry(const RunConfig& base, const GridEntry& e) {
  RunConfig c = base;
  for (const auto& [k, v] : e.overrides) set_config_value(c, k, v);
  return c;
}

inline bool all_modules_off(const RunConfig& c) {
  for (const auto& l : c.model.layers)
    if (l.csm.variant != CsmVariant::off || l.rum.variant != RumVariant::off) return false;
  return true;
}

struct AblationRow {
  std::string name;
  double acc = 0.0;
  double macc = 0.0;
  double dacc = 0.0;   // versus the all-off baseline
  double dmacc = 0.0;
};

/// Deltas against the first all-off row; throws if there is none.
inline void fill_deltas(std::vector<AblationRow>& rows, const std::vector<bool>& is_baseline) {
  std::size_t b = rows.size();
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (is_baseline[i]) {
      b = i;
      break;
    }
  if (b == rows.size()) throw ArgumentError("ablation: no all-off baseline row");
  for (auto& r : rows) {
    r.dacc = r.acc - rows[b].acc;
    r.dmacc = r.macc - rows[b].macc;
  }
}

inline std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "name,acc,dacc,macc,dmacc\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.2f,%+.2f,%.2f,%+.2f\n", r.name.c_str(), 100.0 * r.acc, 100.0 * r.dacc,
                  100.0 * r.macc, 100.0 * r.dmacc);
    os << buf;
  }
  return os.str();
}

/// Trains every entry on the same dataset, split and seed. An all-off baseline
/// entry named "baseline" (or "baseline_2", ... if taken) is prepended when the grid has none. Each run writes
/// into out_dir/<name> when out_dir is set.
inline std::vector<AblationRow> ablation_grid(const RunConfig& base, std::vector<GridEntry> entries, const Dataset& ds,
                                              const Split& split, const std::string& out_dir = "",
                                              const std::function<void(const std::string&)>& log = {}) {
  std::vector<RunConfig> cfgs;
  bool have_baseline = false;
  for (const auto& e : entries) {
    cfgs.push_back(apply_entry(base, e));
    have_baseline = have_baseline || all_modules_off(cfgs.back());
  }
  if (!have_baseline) {
    RunConfig b = base;
    for (auto& l : b.model.layers) {
      l.csm.variant = CsmVariant::off;
      l.rum.variant = RumVariant::off;
    }
    std::string name = "baseline";
    auto taken = [&](const std::string& n) {
      return std::any_of(entries.begin(), entries.end(), [&](const GridEntry& e) { return e.name == n; });
    };
    for (std::size_t i = 2; taken(name); ++i) name = "baseline_" + std::to_string(i);
    entries.insert(entries.begin(), GridEntry{name, {}});
    cfgs.insert(cfgs.begin(), b);
  }
  for (const auto& c : cfgs) validate_run_config(c);
  std::vector<AblationRow> rows;
  std::vector<bool> is_base;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (log) log("== " + entries[i].name);
    const std::string dir = out_dir.empty() ? "" : out_dir + "/" + entries[i].name;
    TrainResult tr = train(cfgs[i], ds, split, dir, log);
    rows.push_back({entries[i].name, tr.final_test.acc, tr.final_test.macc, 0.0, 0.0});
    is_base.push_back(all_modules_off(cfgs[i]));
  }
  fill_deltas(rows, is_base);
  return rows;
}

}  // namespace lrl
