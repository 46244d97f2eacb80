// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [criteria...] [--configs DIR] [--out DIR]
//
// With no criteria listed all six run. Criteria 5 and 6 train the compact
// configurations in DIR (default: configs/acceptance in the source tree) and
// take roughly fifteen minutes on one core.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "lrl/train.hpp"
#include "support/oracles.hpp"
#include "support/plain_baseline.hpp"
#include "support/suites.hpp"

using namespace lrl;
using lrl::testing::uniform_tensor;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Collects failures; keeps the first few messages.
struct Verdict {
  std::size_t checks = 0;
  std::size_t failures = 0;
  std::vector<std::string> notes;
  std::vector<std::string> info;

  void expect(bool ok, const std::string& what) {
    ++checks;
    if (ok) return;
    ++failures;
    if (notes.size() < 5) notes.push_back(what);
  }
  bool passed() const { return failures == 0; }
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

Tensor reorder(const Tensor& t, const std::vector<std::size_t>& order) {
  Tensor out({order.size(), t.cols()});
  for (std::size_t i = 0; i < order.size(); ++i)
    for (std::size_t a = 0; a < t.cols(); ++a) out(i, a) = t(order[i], a);
  return out;
}

std::vector<std::size_t> shuffled_iota(std::size_t n, Rng& rng) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  rng.shuffle(v);
  return v;
}

double total(const Tensor& t) { return std::accumulate(t.data.begin(), t.data.end(), 0.0); }

double row_sum(const Tensor& t, std::size_t r) {
  double s = 0.0;
  for (std::size_t c = 0; c < t.cols(); ++c) s += t(r, c);
  return s;
}

// ---------------------------------------------------------------------------
// 1. Gradients

Verdict gradients() {
  using lrl::testing::SuiteResult;
  Verdict v;
  const auto t0 = Clock::now();
  auto record = [&](const std::string& name, const SuiteResult& r, double tol) {
    v.expect(r.instances >= 20, name + ": only " + std::to_string(r.instances) + " instances");
    v.expect(r.max_rel_error <= tol, name + ": max rel error " + fmt(r.max_rel_error) + " at " + r.worst);
    v.info.push_back(name + " " + fmt(r.max_rel_error, 2));
  };
  for (CsmVariant c : {CsmVariant::csm1, CsmVariant::csm2, CsmVariant::csm3, CsmVariant::csm4, CsmVariant::csm5})
    record(to_string(c), lrl::testing::csm_gradient_suite(c, 20, 0xACC0 + static_cast<std::uint64_t>(c)), 1e-4);
  for (RumVariant r : {RumVariant::rum1, RumVariant::rum2})
    for (ShellAggregation a : {ShellAggregation::cum, ShellAggregation::max})
      record(to_string(r) + "(" + to_string(a) + ")",
             lrl::testing::rum_gradient_suite(r, a, 20, 0xACC8 + static_cast<std::uint64_t>(r)), 1e-4);
  record("loss", lrl::testing::loss_gradient_suite(20, 0xACCA), 1e-4);
  record("network", lrl::testing::end_to_end_gradient_suite(20, 0xACCB), 1e-3);
  const double secs = seconds_since(t0);
  v.expect(secs < 60.0, "runtime " + fmt(secs) + " s");
  v.info.push_back(fmt(secs, 3) + " s");
  return v;
}

// ---------------------------------------------------------------------------
// 2. Brute-force oracles

Verdict oracles() {
  Verdict v;
  const auto t0 = Clock::now();
  Rng rng(0x0AC2);
  auto cloud = [&](std::size_t n, int trial) {
    return trial % 2 ? oracle::grid_points(n, rng) : oracle::random_points(n, rng);
  };
  for (int trial = 0; trial < 200; ++trial) {
    const std::string at = " trial " + std::to_string(trial);
    const std::size_t n = 1 + rng.index(64);
    Tensor p = cloud(n, trial);

    const std::size_t m = 1 + rng.index(n), seed = rng.index(n);
    v.expect(farthest_point_sample(p, m, seed) == oracle::fps(p, m, seed), "fps" + at);

    const Vec3 c = point_at(p, rng.index(n));
    const double r = rng.uniform(0.05, 1.5);
    const std::size_t k = 1 + rng.index(32);
    const auto inside = oracle::ball(p, c, r);
    auto cand = detail::ball_candidates(p, c, r);
    std::sort(cand.begin(), cand.end());
    v.expect(cand == inside, "ball_query candidates" + at);
    const auto got = ball_query(p, c, r, k, rng);
    const std::set<std::size_t> in(inside.begin(), inside.end()), distinct(got.begin(), got.end());
    bool subset = got.size() == k;
    for (std::size_t i : got) subset = subset && in.count(i) > 0;
    v.expect(subset && distinct.size() == std::min(k, inside.size()), "ball_query selection" + at);

    if (n >= 2) {
      const std::size_t j = rng.index(n), u = 1 + rng.index(n - 1);
      v.expect(k_nearest_centers(p, j, u) == oracle::knn_centers(p, j, u), "k_nearest_centers" + at);
    }

    const double r2 = rng.uniform(0.2, 2.0);
    const std::size_t shells = 1 + rng.index(6);
    const auto nbrs = oracle::ball(p, c, r2);
    v.expect(shell_partition(p, nbrs, c, r2, shells).shell_of == oracle::shells(p, nbrs, c, r2, shells),
             "shell_partition" + at);

    Tensor centers = cloud(1 + rng.index(16), trial);
    bool same = true;
    for (std::size_t j = 0; j < centers.rows(); ++j) {
      const Vec3 q = point_at(centers, j);
      same = same && nearest_point(p, q) == oracle::nearest(p, q);
    }
    v.expect(same, "fit_loss nearest point" + at);
  }
  const double secs = seconds_since(t0);
  v.expect(secs < 10.0, "runtime " + fmt(secs) + " s");
  v.info.push_back(std::to_string(v.checks) + " checks, " + fmt(secs, 3) + " s");
  return v;
}

// ---------------------------------------------------------------------------
// 3. Invariants

CsmParams csm_params(ParamStore& store, CsmVariant variant, std::size_t d, std::uint64_t seed,
                     Similarity sim = Similarity::sub) {
  Rng rng(seed);
  CsmSettings s;
  s.variant = variant;
  s.sim = sim;
  return make_csm_params(store, "csm", d, s, rng);
}

RumParams rum_params(ParamStore& store, RumVariant variant, std::size_t d, std::size_t shells, std::uint64_t seed) {
  Rng rng(seed);
  RumSettings s;
  s.variant = variant;
  s.shells = shells;
  return make_rum_params(store, "rum", d, s, rng);
}

struct Region {
  Tensor c, g, p, f;
};

Region random_region(Rng& rng, std::size_t k, std::size_t d) {
  return {uniform_tensor({1, 3}, rng), uniform_tensor({1, d}, rng), uniform_tensor({k, 3}, rng),
          uniform_tensor({k, d}, rng)};
}

Tensor csm_shifts(CsmVariant variant, const std::vector<Region>& regions, const CsmParams& p) {
  Tape t;
  std::vector<CsmNeighborhood> nbs;
  for (const auto& r : regions) nbs.push_back({t.constant(r.c), t.constant(r.g), t.constant(r.p), t.constant(r.f)});
  CsmSettings s;
  s.variant = variant;
  s.sim = p.sim;
  s.u = 2;
  return csm_layer_shifts(nbs, p, s).value();
}

ShellPartition partition_of(const std::vector<std::vector<std::size_t>>& members, std::size_t s) {
  ShellPartition sp;
  sp.shell_of.assign(s, 0);
  for (std::size_t t = 0; t < members.size(); ++t) {
    sp.counts.push_back(members[t].size());
    sp.members.push_back(members[t]);
    for (std::size_t n : members[t]) sp.shell_of[n] = t;
  }
  return sp;
}

ModelConfig invariant_model(CsmVariant csm2, RumVariant rum2) {
  ModelConfig mc;
  LayerConfig a;
  a.n_centers = 32;
  a.radius = 0.25;
  a.k = 8;
  a.mlp = {8, 16};
  LayerConfig b;
  b.n_centers = 8;
  b.radius = 0.5;
  b.k = 8;
  b.mlp = {24};
  b.csm.variant = csm2;
  b.rum.variant = rum2;
  mc.layers = {a, b};
  mc.global_mlp = {32};
  mc.head = {16};
  mc.num_classes = 4;
  return mc;
}

Verdict invariants() {
  Verdict v;
  Rng rng(0x0AC3);

  // Attention rows sum to one.
  double worst_sum = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 1 + rng.index(6), k = 1 + rng.index(8);
    ParamStore store;
    CsmParams p = csm_params(store, CsmVariant::csm1, d, trial);
    Tape t;
    Attention a = attention_aggregate(t.constant(uniform_tensor({1, d}, rng, -3, 3)),
                                      t.constant(uniform_tensor({k, d}, rng, -3, 3)), p);
    worst_sum = std::max(worst_sum, std::abs(total(a.weights.value()) - 1.0));
  }
  for (Similarity s : {Similarity::sub, Similarity::sum, Similarity::cat, Similarity::dot, Similarity::hadamard}) {
    for (int trial = 0; trial < 10; ++trial) {
      ParamStore store;
      CsmParams p = csm_params(store, CsmVariant::csm2, 4, trial, s);
      const std::size_t k = 1 + rng.index(6);
      Region r = random_region(rng, k, 4);
      Tape t;
      Attention a = attention_aggregate_positional(
          {t.constant(r.c), t.constant(r.g), t.constant(r.p), t.constant(r.f)}, p, s);
      worst_sum = std::max(worst_sum, std::abs(total(a.weights.value()) - 1.0));
    }
  }
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t shells = 1 + rng.index(6);
    ParamStore store;
    RumParams p = rum_params(store, RumVariant::rum2, 6, shells, trial);
    Tape t;
    Tensor a = shell_attention(t.constant(uniform_tensor({shells, 3}, rng, -4, 4)), p).weights.value();
    for (std::size_t i = 0; i < shells; ++i) worst_sum = std::max(worst_sum, std::abs(row_sum(a, i) - 1.0));
  }
  v.expect(worst_sum <= 1e-12, "attention row sum off by " + fmt(worst_sum));

  // Per-axis shift bound, with saturated tanh.
  for (CsmVariant variant : {CsmVariant::csm1, CsmVariant::csm2, CsmVariant::csm3}) {
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t d = 2 + rng.index(3), k = 1 + rng.index(6);
      ParamStore store;
      CsmParams p = csm_params(store, variant, d, trial);
      for (auto& w : p.gamma.layers.front().weight->tensor.data) w *= 30.0;
      std::vector<Region> regions;
      for (int j = 0; j < 3; ++j) regions.push_back(random_region(rng, k, d));
      Tensor s = csm_shifts(variant, regions, p);
      for (std::size_t j = 0; j < 3; ++j) {
        for (std::size_t a = 0; a < 3; ++a) {
          double bound = 0.0;
          for (std::size_t n = 0; n < k; ++n) bound += std::abs(regions[j].c(0, a) - regions[j].p(n, a));
          bound /= static_cast<double>(k);
          v.expect(std::abs(s(j, a)) <= bound, to_string(variant) + " shift exceeds per-axis bound");
        }
      }
    }
  }

  // |Δr| < r, including where tanh rounds to ±1.
  for (RumVariant variant : {RumVariant::rum1, RumVariant::rum2}) {
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t d = 2 + rng.index(3), shells = 1 + rng.index(4), s = 1 + rng.index(8);
      ParamStore store;
      RumParams p = rum_params(store, variant, d, shells, trial);
      const double gain = trial % 2 ? 1.0 : 1e4;
      for (ParamBlock* b : store.all())
        for (auto& w : b->tensor.data) w *= gain;
      std::vector<std::vector<std::size_t>> members(shells);
      for (std::size_t n = 0; n < s; ++n) members[rng.index(shells)].push_back(n);
      const double r = std::ldexp(1.0, -static_cast<int>(rng.index(6))) * (trial % 3 ? 1.0 : 0.37);
      Tape t;
      RumContext ctx{t.constant(uniform_tensor({1, d}, rng)), t.constant(uniform_tensor({s, d}, rng)),
                     partition_of(members, s), r};
      const double dr = (variant == RumVariant::rum1 ? rum1_delta(ctx, p, ShellAggregation::max)
                                                     : rum2_delta(ctx, p, ShellAggregation::max))
                            .item();
      v.expect(std::abs(dr) < r && r + dr > 0.0, to_string(variant) + " |dr| >= r");
    }
  }

  // CSM aggregation ignores neighbor order, duplicates included.
  for (CsmVariant variant :
       {CsmVariant::csm1, CsmVariant::csm2, CsmVariant::csm3, CsmVariant::csm4, CsmVariant::csm5}) {
    for (int trial = 0; trial < 25; ++trial) {
      const std::size_t d = 2 + rng.index(4), k = 1 + rng.index(7);
      ParamStore store;
      CsmParams p = csm_params(store, variant, d, trial);
      std::vector<Region> regions, perm;
      for (int j = 0; j < 3; ++j) regions.push_back(random_region(rng, k, d));
      if (k > 1) {
        for (std::size_t a = 0; a < 3; ++a) regions[0].p(1, a) = regions[0].p(0, a);
        for (std::size_t a = 0; a < d; ++a) regions[0].f(1, a) = regions[0].f(0, a);
      }
      for (const auto& r : regions) {
        const auto order = shuffled_iota(k, rng);
        perm.push_back({r.c, r.g, reorder(r.p, order), reorder(r.f, order)});
      }
      v.expect(csm_shifts(variant, regions, p) == csm_shifts(variant, perm, p),
               to_string(variant) + " not invariant to neighbor order");
    }
  }

  // RUM shell aggregation ignores order within and across shells.
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t d = 2 + rng.index(4), shells = 1 + rng.index(4), s = 1 + rng.index(12);
    ParamStore store;
    RumParams p = rum_params(store, RumVariant::rum2, d, shells, trial);
    Tensor g = uniform_tensor({1, d}, rng), f = uniform_tensor({s, d}, rng);
    std::vector<std::vector<std::size_t>> members(shells);
    std::vector<std::size_t> shell_of(s);
    for (std::size_t n = 0; n < s; ++n) members[shell_of[n] = rng.index(shells)].push_back(n);
    const auto order = shuffled_iota(s, rng);
    std::vector<std::vector<std::size_t>> moved(shells);
    for (std::size_t i = 0; i < s; ++i) moved[shell_of[order[i]]].push_back(i);
    for (auto& m : moved) rng.shuffle(m);
    Tape t;
    RumContext a{t.constant(g), t.constant(f), partition_of(members, s), 0.4};
    RumContext b{t.constant(g), t.constant(reorder(f, order)), partition_of(moved, s), 0.4};
    for (ShellAggregation agg : {ShellAggregation::cum, ShellAggregation::max}) {
      v.expect(shell_features(a, p, agg).value() == shell_features(b, p, agg).value() &&
                   rum2_delta(a, p, agg).value() == rum2_delta(b, p, agg).value() &&
                   rum1_delta(a, p, agg).value() == rum1_delta(b, p, agg).value(),
               "RUM shell aggregation not invariant to order");
    }
  }

  // Max pooling ignores order inside each group.
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 1 + rng.index(8), m = 1 + rng.index(6);
    Tensor h = uniform_tensor({m * k, 5}, rng);
    std::vector<std::size_t> order;
    for (std::size_t j = 0; j < m; ++j) {
      auto g = shuffled_iota(k, rng);
      for (auto& i : g) i += j * k;
      order.insert(order.end(), g.begin(), g.end());
    }
    Tape t;
    v.expect(segment_max_rows(t.constant(h), k).value() == segment_max_rows(t.constant(reorder(h, order)), k).value(),
             "max pooling not invariant to order");
  }

  // Toggles off reproduce the plain network bitwise.
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    Model model(invariant_model(CsmVariant::off, RumVariant::off), seed);
    Tensor cloud = uniform_tensor({96 + 16 * seed, 3}, rng);
    const std::uint64_t sample_seed = derive_seed({seed, 0xAB});
    Tape t;
    ClassifyOutput out = classify(t, cloud, model, sample_seed);
    auto plain = lrl::plain::forward(cloud, model, sample_seed);
    std::vector<std::vector<std::size_t>> groups;
    for (const auto& rec : out.records) groups.insert(groups.end(), rec.regions.groups.begin(), rec.regions.groups.end());
    v.expect(out.logits.value().data == plain.logits && groups == plain.groups,
             "toggle-off forward differs from plain network, seed " + std::to_string(seed));
  }

  v.info.push_back(std::to_string(v.checks) + " checks");
  return v;
}

// ---------------------------------------------------------------------------
// 4. Hinge and cross-entropy arithmetic

Verdict hinges() {
  Verdict v;
  auto near = [&](double got, double want, const std::string& what) {
    v.expect(std::abs(got - want) <= 1e-12, what + ": got " + fmt(got, 17) + ", want " + fmt(want, 17));
  };
  auto column = [](std::vector<double> x) {
    const std::size_t n = x.size();
    return Tensor({n, 1}, std::move(x));
  };
  Tape t;
  near(range_loss(t.constant(Tensor::from_rows({{0.1, 0, 0}, {0, 0.2, 0}, {0, 0, 0}})), 0.2).item(), 0.0, "range inside");
  near(range_loss(t.constant(Tensor::from_rows({{0.5, 0, 0}})), 0.2).item(), 0.3, "range single");
  near(range_loss(t.constant(Tensor::from_rows({{0.1, 0, 0}, {0, 0.5, 0}, {0, 0, 0.7}})), 0.4).item(), 0.4 / 3.0,
       "range mixed");
  near(rum_loss(t.constant(column({-0.2, 0.0, 0.2, 0.1})), 0.2).item(), 0.0, "rum inside");
  near(rum_loss(t.constant(column({-0.3})), 0.2).item(), 0.1, "rum lower");
  near(rum_loss(t.constant(column({0.3})), 0.2).item(), 0.1, "rum upper");
  near(rum_loss(t.constant(column({0.3, -0.3, 0.0, 0.1})), 0.2).item(), 0.05, "rum mean");
  near(cross_entropy(t.constant(Tensor::from_rows({{0.7, 0.7, 0.7, 0.7}})), 1).item(), std::log(4.0), "ce uniform");
  near(cross_entropy(t.constant(Tensor::from_rows({{0.0, 0.0, 0.0, 0.0}})), 3).item(), std::log(4.0), "ce zeros");
  v.info.push_back(std::to_string(v.checks) + " checks");
  return v;
}

// ---------------------------------------------------------------------------
// 5 and 6. Training

struct Run {
  EvalResult test;
  double seconds = 0.0;
  std::string csv;
};

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Run train_named(const std::string& config_dir, const std::string& out_dir, const std::string& name,
                const std::string& run_name) {
  const RunConfig cfg = load_config(config_dir + "/" + name + ".cfg");
  const auto t0 = Clock::now();
  const Dataset ds = dataset_for(cfg);
  const Split sp = stratified_split(ds, cfg.test_fraction, cfg.seed);
  const std::string dir = out_dir + "/" + run_name;
  TrainResult tr = train(cfg, ds, sp, dir);
  Run r{tr.final_test, seconds_since(t0), slurp(dir + "/metrics.csv")};
  std::cerr << "  " << run_name << ": test acc " << fmt(r.test.acc) << ", " << fmt(r.seconds, 3) << " s\n";
  return r;
}

Verdict trend(const std::string& config_dir, const std::string& out_dir, std::map<std::string, Run>& runs) {
  Verdict v;
  for (const char* name : {"base", "csm", "rum", "comb", "cbase", "ccomb"}) {
    runs[name] = train_named(config_dir, out_dir, name, name);
    v.expect(runs[name].seconds < 900.0, std::string(name) + " took " + fmt(runs[name].seconds) + " s");
  }
  const double a0 = runs["base"].test.acc;
  v.expect(a0 >= 0.90, "baseline A0 = " + fmt(a0) + " < 0.90");
  for (const char* name : {"csm", "rum", "comb"})
    v.expect(runs[name].test.acc >= a0 - 0.02, std::string(name) + " acc " + fmt(runs[name].test.acc) + " < A0 - 0.02");
  v.expect(runs["ccomb"].test.acc >= runs["cbase"].test.acc,
           "clutter: combined " + fmt(runs["ccomb"].test.acc) + " < baseline " + fmt(runs["cbase"].test.acc));
  std::ostringstream os;
  os << "A0=" << fmt(a0) << " csm=" << fmt(runs["csm"].test.acc) << " rum=" << fmt(runs["rum"].test.acc)
     << " comb=" << fmt(runs["comb"].test.acc) << " clutter base=" << fmt(runs["cbase"].test.acc)
     << " comb=" << fmt(runs["ccomb"].test.acc);
  v.info.push_back(os.str());
  return v;
}

Verdict determinism(const std::string& config_dir, const std::string& out_dir, std::map<std::string, Run>& runs) {
  Verdict v;
  if (!runs.count("base")) runs["base"] = train_named(config_dir, out_dir, "base", "base");
  const Run again = train_named(config_dir, out_dir, "base", "base_repeat");
  v.expect(!runs["base"].csv.empty(), "empty metrics CSV");
  v.expect(again.csv == runs["base"].csv, "metrics CSV differs between identical runs");
  v.info.push_back(std::to_string(again.csv.size()) + " bytes");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> selected;
  std::string config_dir = LRL_ACCEPTANCE_CONFIGS;
  std::string out_dir;
  app.add_option("criteria", selected, "Criteria to run (1-6); default all")->check(CLI::Range(1, 6));
  app.add_option("--configs", config_dir, "Directory holding the training configs")->check(CLI::ExistingDirectory);
  app.add_option("--out", out_dir, "Where training runs write their outputs");
  CLI11_PARSE(app, argc, argv);
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6};
  std::sort(selected.begin(), selected.end());
  selected.erase(std::unique(selected.begin(), selected.end()), selected.end());

  const bool own_out = out_dir.empty();
  if (own_out) out_dir = (fs::temp_directory_path() / "lrl_acceptance").string();
  fs::create_directories(out_dir);

  const std::map<int, std::string> titles = {{1, "gradient suite"},   {2, "oracle equivalence"},
                                             {3, "invariants"},       {4, "hinge-loss arithmetic"},
                                             {5, "desk-scale trend"}, {6, "determinism"}};
  std::map<std::string, Run> runs;
  int failed = 0;
  for (int c : selected) {
    Verdict v;
    try {
      switch (c) {
        case 1: v = gradients(); break;
        case 2: v = oracles(); break;
        case 3: v = invariants(); break;
        case 4: v = hinges(); break;
        case 5: v = trend(config_dir, out_dir, runs); break;
        case 6: v = determinism(config_dir, out_dir, runs); break;
      }
    } catch (const std::exception& e) {
      v.expect(false, std::string("exception: ") + e.what());
    }
    std::cout << (v.passed() ? "PASS" : "FAIL") << " criterion " << c << " (" << titles.at(c) << ")";
    for (const auto& s : v.info) std::cout << " | " << s;
    std::cout << '\n';
    for (const auto& n : v.notes) std::cout << "    " << n << '\n';
    if (v.failures > v.notes.size()) std::cout << "    ... " << v.failures - v.notes.size() << " more\n";
    std::cout << std::flush;
    failed += v.passed() ? 0 : 1;
  }
  if (own_out) fs::remove_all(out_dir);
  return failed == 0 ? 0 : 1;
}
