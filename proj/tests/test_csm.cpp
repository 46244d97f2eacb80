#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "lrl/csm.hpp"
#include "support/fill.hpp"
#include "support/suites.hpp"

using namespace lrl;
using lrl::testing::fill_params;
using lrl::testing::uniform_tensor;

namespace {

struct Instance {
  Tensor c, g, p, f;
};

// Frozen hand instances; tests/oracles/derive_values.py holds the reference arithmetic.
const Instance kA{Tensor::from_rows({{0.1, -0.2, 0.05}}), Tensor::from_rows({{0.3, -0.4}}),
                  Tensor::from_rows({{0.2, 0.1, 0.0}, {-0.1, -0.3, 0.2}}), Tensor::from_rows({{0.5, 0.1}, {-0.2, 0.7}})};
const Instance kR1{Tensor::from_rows({{-0.3, 0.2, 0.1}}), Tensor::from_rows({{-0.1, 0.6}}),
                   Tensor::from_rows({{-0.2, 0.25, 0.0}, {-0.4, 0.1, 0.3}}),
                   Tensor::from_rows({{0.2, -0.3}, {0.4, 0.4}})};
const Instance kR2{Tensor::from_rows({{0.4, 0.3, -0.2}}), Tensor::from_rows({{0.7, 0.2}}),
                   Tensor::from_rows({{0.5, 0.2, -0.1}, {0.3, 0.45, -0.3}}),
                   Tensor::from_rows({{-0.6, 0.3}, {0.1, -0.5}})};

CsmNeighborhood on_tape(Tape& t, const Instance& in) {
  return {t.constant(in.c), t.constant(in.g), t.constant(in.p), t.constant(in.f)};
}

CsmParams hand_params(ParamStore& store, CsmVariant v, std::size_t d = 2, Similarity sim = Similarity::sub) {
  Rng rng(1);
  CsmSettings s;
  s.variant = v;
  s.sim = sim;
  s.u = 2;
  CsmParams p = make_csm_params(store, "csm", d, s, rng);
  fill_params(store);
  return p;
}

CsmParams random_params(ParamStore& store, CsmVariant v, std::size_t d, std::uint64_t seed,
                        Similarity sim = Similarity::sub) {
  Rng rng(seed);
  CsmSettings s;
  s.variant = v;
  s.sim = sim;
  return make_csm_params(store, "csm", d, s, rng);
}

void expect_values(const Tensor& t, const std::vector<double>& want, double tol = 1e-12) {
  ASSERT_EQ(t.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(t.data[i], want[i], tol) << "entry " << i;
}

Instance random_instance(Rng& rng, std::size_t k, std::size_t d) {
  return {uniform_tensor({1, 3}, rng), uniform_tensor({1, d}, rng), uniform_tensor({k, 3}, rng),
          uniform_tensor({k, d}, rng)};
}

Tensor permute_rows(const Tensor& t, const std::vector<std::size_t>& order) {
  Tensor out(t.shape);
  const std::size_t c = t.cols();
  for (std::size_t i = 0; i < order.size(); ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) = t(order[i], j);
  return out;
}

Instance shuffled(const Instance& in, Rng& rng) {
  std::vector<std::size_t> order(in.p.rows());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  return {in.c, in.g, permute_rows(in.p, order), permute_rows(in.f, order)};
}

Tensor shifts_of(CsmVariant v, const std::vector<Instance>& regions, const CsmParams& p, std::size_t u = 1) {
  Tape t;
  std::vector<CsmNeighborhood> nbs;
  for (const auto& r : regions) nbs.push_back(on_tape(t, r));
  CsmSettings s;
  s.variant = v;
  s.sim = p.sim;
  s.u = u;
  return csm_layer_shifts(nbs, p, s).value();
}

Tensor theta_matrix_at_zero(Tape& t, const CsmParams& p) {
  return reshape(mlp_forward(p.theta, t.constant(Tensor::matrix(1, p.feature_dim))), {3, 3}).value();
}

}  // namespace

// ---------------------------------------------------------------------------
// attention_aggregate

TEST(AttentionAggregate, HandValues) {
  ParamStore store;
  CsmParams p = hand_params(store, CsmVariant::csm1);
  Tape t;
  Attention a = attention_aggregate(t.constant(kA.g), t.constant(kA.f), p);
  expect_values(a.weights.value(), {0.4993829355264252, 0.5006170644735748});
  expect_values(a.output.value(), {0.06525541751396086, 0.2246986480335097});
}

TEST(AttentionAggregate, IdenticalNeighborsGiveUniformWeights) {
  ParamStore store;
  CsmParams p = random_params(store, CsmVariant::csm1, 4, 11);
  Tape t;
  Tensor f = Tensor::matrix(5, 4);
  for (std::size_t k = 0; k < 5; ++k) f.data[k * 4 + 1] = 0.3, f.data[k * 4 + 3] = -0.7;
  Attention a = attention_aggregate(t.constant(Tensor::from_rows({{0.2, -0.1, 0.9, 0.4}})), t.constant(f), p);
  for (double w : a.weights.value().data) EXPECT_NEAR(w, 0.2, 1e-15);
}

TEST(AttentionAggregate, SingleNeighborHasWeightOne) {
  ParamStore store;
  CsmParams p = random_params(store, CsmVariant::csm1, 2, 5);
  Tape t;
  Var f = t.constant(Tensor::from_rows({{0.4, -0.8}}));
  Attention a = attention_aggregate(t.constant(Tensor::from_rows({{1.0, 2.0}})), f, p);
  EXPECT_EQ(a.weights.value(), Tensor::from_rows({{1.0}}));
  EXPECT_EQ(a.output.value(), mlp_forward(p.phi, apply(p.value, f)).value());
}

TEST(AttentionAggregate, DimensionMismatchThrows) {
  ParamStore store;
  CsmParams p = random_params(store, CsmVariant::csm1, 2, 5);
  Tape t;
  EXPECT_THROW(attention_aggregate(t.constant(Tensor::matrix(1, 2)), t.constant(Tensor::matrix(3, 3)), p), ShapeError);
  EXPECT_THROW(attention_aggregate(t.constant(Tensor::matrix(1, 3)), t.constant(Tensor::matrix(3, 2)), p), ShapeError);
}

TEST(AttentionAggregate, WeightsSumToOne) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 1 + rng.index(6), k = 1 + rng.index(8);
    ParamStore store;
    CsmParams p = random_params(store, CsmVariant::csm1, d, trial);
    Tape t;
    Attention a = attention_aggregate(t.constant(uniform_tensor({1, d}, rng, -3, 3)),
                                      t.constant(uniform_tensor({k, d}, rng, -3, 3)), p);
    double s = 0.0;
    for (double w : a.weights.value().data) s += w;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(AttentionAggregate, ProjectionWidthIsHalfFeatureDim) {
  ParamStore store;
  CsmParams p = random_params(store, CsmVariant::csm1, 6, 1);
  EXPECT_EQ(p.qk_dim, 3u);
  EXPECT_EQ(p.query.out_dim(), 3u);
  EXPECT_EQ(p.key.out_dim(), 3u);
  EXPECT_EQ(p.value.out_dim(), 3u);
  EXPECT_EQ(p.phi.out_dim(), 6u);
  EXPECT_EQ(p.gamma.out_dim(), 3u);
  EXPECT_EQ(p.gamma.activations.back(), Activation::tanh);
}

// ---------------------------------------------------------------------------
// attention_aggregate_positional

TEST(PositionalAttention, HandWeights) {
  ParamStore store;
  CsmParams p = hand_params(store, CsmVariant::csm2);
  Tape t;
  Attention a = attention_aggregate_positional(on_tape(t, kA), p, Similarity::sub);
  expect_values(a.weights.value(), {0.6764454194050694, 0.32355458059493053});
}

TEST(PositionalAttention, IdenticalNeighborsAtIdenticalOffsetsAreUniform) {
  ParamStore store;
  CsmParams p = random_params(store, CsmVariant::csm2, 2, 3);
  Tape t;
  Instance in{Tensor::from_rows({{0, 0, 0}}), Tensor::from_rows({{0.1, 0.2}}),
              Tensor::from_rows({{0.1, 0.1, 0.1}, {0.1, 0.1, 0.1}, {0.1, 0.1, 0.1}}),
              Tensor::from_rows({{0.5, -0.5}, {0.5, -0.5}, {0.5, -0.5}})};
  Attention a = attention_aggregate_positional(on_tape(t, in), p, Similarity::sub);
  for (double w : a.weights.value().data) EXPECT_NEAR(w, 1.0 / 3.0, 1e-15);
}

TEST(PositionalAttention, SimilarityWidths) {
  Tape t;
  Var q = t.constant(Tensor::matrix(4, 3, 0.5));
  Var k = t.constant(Tensor::matrix(4, 3, 2.0));
  EXPECT_EQ(similarity(Similarity::dot, q, k).value().cols(), 1u);
  EXPECT_EQ(similarity(Similarity::dot, q, k).value()(0, 0), 3.0);
  EXPECT_EQ(similarity(Similarity::cat, q, k).value().cols(), 6u);
  EXPECT_EQ(similarity(Similarity::sub, q, k).value()(1, 2), -1.5);
  EXPECT_EQ(similarity(Similarity::sum, q, k).value()(1, 2), 2.5);
  EXPECT_EQ(similarity(Similarity::hadamard, q, k).value()(1, 2), 1.0);
  for (Similarity s : {Similarity::sub, Similarity::sum, Similarity::cat, Similarity::dot, Similarity::hadamard}) {
    ParamStore store;
    CsmParams p = random_params(store, CsmVariant::csm2, 4, 2, s);
    EXPECT_EQ(p.vartheta.in_dim(), 3 + similarity_width(s, 2)) << to_string(s);
  }
  ParamStore store;
  CsmParams p = random_params(store, CsmVariant::csm2, 4, 2, Similarity::dot);
  EXPECT_EQ(p.vartheta.in_dim(), 4u);
}

TEST(PositionalAttention, SimilarityShapeMismatchThrows) {
  Tape t;
  Var q = t.constant(Tensor::matrix(4, 3));
  Var k = t.constant(Tensor::matrix(4, 2));
  EXPECT_THROW(similarity(Similarity::sub, q, k), ShapeError);
  EXPECT_THROW(similarity(Similarity::dot, q, k), ShapeError);
}

TEST(PositionalAttention, UnknownSimilarityNameThrows) {
  EXPECT_THROW(parse_similarity("cosine"), ArgumentError);
  EXPECT_EQ(parse_similarity("hadamard"), Similarity::hadamard);
}

TEST(PositionalAttention, ZeroThetaReducesToFeatureTerm) {
  ParamStore store;
  CsmParams p = random_params(store, CsmVariant::csm2, 4, 9);
  std::fill(p.theta_pos.weight->tensor.data.begin(), p.theta_pos.weight->tensor.data.end(), 0.0);
  Rng rng(4);
  Instance in = random_instance(rng, 4, 4);
  Tape t;
  CsmNeighborhood nb = on_tape(t, in);
  Attention a = attention_aggregate_positional(nb, p, Similarity::sub);
  // Same formula with the positional block replaced by zeros.
  Var d = sub(repeat_rows(apply(p.query, nb.center_feature), 4), apply(p.key, nb.neighbor_feat));
  Var logits = mlp_forward(p.vartheta, concat_cols(t.constant(Tensor::matrix(4, 3)), d));
  Tensor want = softmax(reshape(logits, {1, 4})).value();
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(a.weights.value().data[i], want.data[i], 1e-15);
}

TEST(PositionalAttention, WeightsSumToOneForEverySimilarity) {
  Rng rng(8);
  for (Similarity s : {Similarity::sub, Similarity::sum, Similarity::cat, Similarity::dot, Similarity::hadamard}) {
    for (int trial = 0; trial < 10; ++trial) {
      ParamStore store;
      CsmParams p = random_params(store, CsmVariant::csm2, 4, trial, s);
      Tape t;
      Attention a = attention_aggregate_positional(on_tape(t, random_instance(rng, 1 + rng.index(6), 4)), p, s);
      double sum = 0.0;
      for (double w : a.weights.value().data) sum += w;
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

// ---------------------------------------------------------------------------
// CSM-I / CSM-II

TEST(Csm1, HandShift) {
  ParamStore store;
  CsmParams p = hand_params(store, CsmVariant::csm1);
  Tape t;
  expect_values(csm1_shift(on_tape(t, kA), p).value(), {0.019723184654156397, -0.04182220449262393, -0.01966794324935419});
}

TEST(Csm1, ZeroRelativePositionsGiveZeroShift) {
  ParamStore store;
  CsmParams p = random_params(store, CsmVariant::csm1, 3, 2);
  Rng rng(6);
  Instance in = random_instance(rng, 4, 3);
  in.p = Tensor::from_rows({{0.3, -0.2, 0.1}, {0.3, -0.2, 0.1}, {0.3, -0.2, 0.1}, {0.3, -0.2, 0.1}});
  in.c = Tensor::from_rows({{0.3, -0.2, 0.1}});
  Tape t;
  EXPECT_EQ(csm1_shift(on_tape(t, in), p).value(), Tensor::matrix(1, 3));
}

TEST(Csm1, EmptyNeighborhoodThrows) {
  ParamStore store;
  CsmParams p = random_params(store, CsmVariant::csm1, 2, 2);
  Tape t;
  CsmNeighborhood nb{t.constant(Tensor::matrix(1, 3)), t.constant(Tensor::matrix(1, 2)),
                     t.constant(Tensor::matrix(0, 3)), t.constant(Tensor::matrix(0, 2))};
  EXPECT_THROW(csm1_shift(nb, p), ArgumentError);
}

TEST(Csm1, FeatureWidthMismatchThrows) {
  ParamStore store;
  CsmParams p = random_params(store, CsmVariant::csm1, 2, 2);
  Tape t;
  CsmNeighborhood nb{t.constant(Tensor::matrix(1, 3)), t.constant(Tensor::matrix(1, 3)),
                     t.constant(Tensor::matrix(2, 3)), t.constant(Tensor::matrix(2, 3))};
  EXPECT_THROW(csm1_shift(nb, p), ShapeError);
}

TEST(Csm1, BatchedMatchesPerCenterBitwise) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 2 + rng.index(4), k = 1 + rng.index(6), m = 1 + rng.index(5);
    ParamStore store;
    CsmParams p = random_params(store, CsmVariant::csm1, d, trial);
    std::vector<Instance> regions;
    for (std::size_t j = 0; j < m; ++j) regions.push_back(random_instance(rng, k, d));
    Tape t;
    std::vector<Var> c, g, pp, f;
    for (const auto& r : regions) {
      c.push_back(t.constant(r.c));
      g.push_back(t.constant(r.g));
      pp.push_back(t.constant(r.p));
      f.push_back(t.constant(r.f));
    }
    Tensor batched =
        csm1_shifts({stack_rows(c), stack_rows(g), stack_rows(pp), stack_rows(f), k}, p).value();
    EXPECT_EQ(batched, shifts_of(CsmVariant::csm1, regions, p));
  }
}

TEST(Csm2, HandShift) {
  ParamStore store;
  CsmParams p = hand_params(store, CsmVariant::csm2);
  Tape t;
  expect_values(csm2_shift(on_tape(t, kA), p, Similarity::sub).value(),
                {0.019720929169413738, -0.041821713226389196, -0.019669761646752448});
}

TEST(Csm2, ZeroRelativePositionsGiveZeroShift) {
  ParamStore store;
  CsmParams p = random_params(store, CsmVariant::csm2, 2, 2);
  Rng rng(3);
  Instance in = random_instance(rng, 3, 2);
  in.p = Tensor::matrix(3, 3, 0.25);
  in.c = Tensor::matrix(1, 3, 0.25);
  Tape t;
  EXPECT_EQ(csm2_shift(on_tape(t, in), p, Similarity::sub).value(), Tensor::matrix(1, 3));
}

TEST(CsmBound, ShiftComponentsStayWithinMeanOffset) {
  Rng rng(77);
  for (CsmVariant v : {CsmVariant::csm1, CsmVariant::csm2, CsmVariant::csm3}) {
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t d = 2 + rng.index(3), k = 1 + rng.index(6);
      ParamStore store;
      CsmParams p = random_params(store, v, d, trial);
      // Blow the γ weights up so the tanh output saturates near ±1.
      for (auto& w : p.gamma.layers.front().weight->tensor.data) w *= 30.0;
      std::vector<Instance> regions;
      for (int j = 0; j < 3; ++j) regions.push_back(random_instance(rng, k, d));
      Tensor s = shifts_of(v, regions, p, 2);
      for (std::size_t j = 0; j < 3; ++j) {
        for (std::size_t a = 0; a < 3; ++a) {
          double bound = 0.0;
          for (std::size_t n = 0; n < k; ++n) bound += std::abs(regions[j].c(0, a) - regions[j].p(n, a));
          bound /= static_cast<double>(k);
          EXPECT_LE(std::abs(s(j, a)), bound) << to_string(v);
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// CSM-III

TEST(Csm3, HandShifts) {
  ParamStore store;
  CsmParams p = hand_params(store, CsmVariant::csm3);
  Tensor s = shifts_of(CsmVariant::csm3, {kA, kR1, kR2}, p, 2);
  expect_values(s, {0.01979274086132154, -0.0418373684143489, -0.01961179452723543, -0.0006588429845244964,
                    0.010417295262292929, -0.020406295897019457, 5.506369792335902e-05, -0.010499359305006551,
                    -4.4779107157069675e-05});
}

TEST(Csm3, NeighborCountOutOfRangeThrows) {
  ParamStore store;
  CsmParams p = hand_params(store, CsmVariant::csm3);
  Tape t;
  std::vector<CsmNeighborhood> nbs{on_tape(t, kA), on_tape(t, kR1), on_tape(t, kR2)};
  EXPECT_THROW(csm3_shifts(nbs, p, 0), ArgumentError);
  EXPECT_THROW(csm3_shifts(nbs, p, 3), ArgumentError);
  EXPECT_NO_THROW(csm3_shifts(nbs, p, 1));
}

TEST(Csm3, SingleNeighborCenterHasWeightOne) {
  ParamStore store;
  CsmParams p = hand_params(store, CsmVariant::csm3);
  Tape t;
  std::vector<CsmNeighborhood> nbs{on_tape(t, kA), on_tape(t, kA)};
  CenterFeatures cf = updated_center_features(nbs, p);
  Attention b = center_attention(row(cf.g_bar, 0), gather_rows(cf.g_bar, {1}), p);
  EXPECT_EQ(b.weights.value(), Tensor::from_rows({{1.0}}));
}

TEST(Csm3, CoincidentCentersShareCenterAttention) {
  ParamStore store;
  CsmParams p = random_params(store, CsmVariant::csm3, 3, 4);
  Rng rng(12);
  Instance in = random_instance(rng, 3, 3);
  Tape t;
  std::vector<CsmNeighborhood> nbs{on_tape(t, in), on_tape(t, in), on_tape(t, in), on_tape(t, in)};
  CenterFeatures cf = updated_center_features(nbs, p);
  Tensor first = center_attention(row(cf.g_bar, 0), gather_rows(cf.g_bar, {1, 2}), p).output.value();
  for (std::size_t j = 1; j < 4; ++j) {
    auto near = k_nearest_centers(center_positions(nbs), j, 2);
    EXPECT_EQ(center_attention(row(cf.g_bar, j), gather_rows(cf.g_bar, near), p).output.value(), first);
  }
  Tensor s = shifts_of(CsmVariant::csm3, {in, in, in, in}, p, 2);
  for (std::size_t j = 1; j < 4; ++j)
    for (std::size_t a = 0; a < 3; ++a) EXPECT_EQ(s(j, a), s(0, a));
}

// ---------------------------------------------------------------------------
// CSM-IV

TEST(Csm4, HandShifts) {
  ParamStore store;
  CsmParams p = hand_params(store, CsmVariant::csm4);
  expect_values(shifts_of(CsmVariant::csm4, {kA, kR1, kR2}, p),
                {0.014358690930267287, 0.09413177985348253, 0.06935486907622403, -0.07459282441643607,
                 0.036844482837058296, 0.1073594716602182, 0.07094126760486415, -0.13766486016040583,
                 -0.19336979864678705});
}

TEST(Csm4, SingleCenterThrows) {
  ParamStore store;
  CsmParams p = hand_params(store, CsmVariant::csm4);
  Tape t;
  std::vector<CsmNeighborhood> nbs{on_tape(t, kA)};
  EXPECT_THROW(csm4_shifts(nbs, p), ArgumentError);
}

TEST(Csm4, CoincidentCentersGiveZeroShifts) {
  ParamStore store;
  CsmParams p = random_params(store, CsmVariant::csm4, 2, 6);
  Instance a = kA, b = kR1, c = kR2;
  b.c = a.c;
  c.c = a.c;
  EXPECT_EQ(shifts_of(CsmVariant::csm4, {a, b, c}, p), Tensor::matrix(3, 3));
}

TEST(Csm4, TwoCentersWithIdenticalFeaturesAreAntisymmetric) {
  ParamStore store;
  CsmParams p = random_params(store, CsmVariant::csm4, 2, 6);
  Instance a = kA, b = kA;
  b.c = Tensor::from_rows({{0.6, 0.1, -0.3}});
  Tensor s = shifts_of(CsmVariant::csm4, {a, b}, p);
  Tape t;
  Tensor th = theta_matrix_at_zero(t, p);
  for (std::size_t r = 0; r < 3; ++r) {
    double want = 0.0;
    for (std::size_t k = 0; k < 3; ++k) want += 0.5 * th(r, k) * (a.c(0, k) - b.c(0, k));
    EXPECT_NEAR(s(0, r), want, 1e-15);
    EXPECT_EQ(s(1, r), -s(0, r));
  }
}

// ---------------------------------------------------------------------------
// CSM-V

TEST(Csm5, HandShift) {
  ParamStore store;
  CsmParams p = hand_params(store, CsmVariant::csm5);
  Tape t;
  expect_values(csm5_shift(on_tape(t, kA), p).value(), {0.1370068986823726, 0.044260125785689344, 0.09139320724320417});
}

TEST(Csm5, SingleNeighborGivesZero) {
  ParamStore store;
  CsmParams p = random_params(store, CsmVariant::csm5, 3, 1);
  Rng rng(2);
  Tape t;
  EXPECT_EQ(csm5_shift(on_tape(t, random_instance(rng, 1, 3)), p).value(), Tensor::matrix(1, 3));
}

TEST(Csm5, CoincidentNeighborsGiveZero) {
  ParamStore store;
  CsmParams p = random_params(store, CsmVariant::csm5, 3, 1);
  Rng rng(2);
  Instance in = random_instance(rng, 4, 3);
  in.p = Tensor::matrix(4, 3, -0.4);
  Tape t;
  EXPECT_EQ(csm5_shift(on_tape(t, in), p).value(), Tensor::matrix(1, 3));
}

TEST(Csm5, NoAttentionBlocks) {
  ParamStore store;
  CsmParams p = random_params(store, CsmVariant::csm5, 4, 1);
  EXPECT_EQ(p.query.weight, nullptr);
  EXPECT_TRUE(p.gamma.empty());
  EXPECT_EQ(p.theta.out_dim(), 9u);
  EXPECT_EQ(p.theta.layers.front().out_dim(), 64u);
}

// ---------------------------------------------------------------------------
// Properties over every variant

class CsmVariants : public ::testing::TestWithParam<CsmVariant> {};

TEST_P(CsmVariants, ShiftsAreExactlyInvariantToNeighborOrder) {
  const CsmVariant v = GetParam();
  Rng rng(static_cast<std::uint64_t>(v) * 101);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t d = 2 + rng.index(4), k = 1 + rng.index(7);
    ParamStore store;
    CsmParams p = random_params(store, v, d, trial);
    std::vector<Instance> regions, perm;
    for (int j = 0; j < 3; ++j) regions.push_back(random_instance(rng, k, d));
    // A duplicated neighbor row exercises ties in the canonical order.
    if (k > 1) {
      for (std::size_t a = 0; a < 3; ++a) regions[0].p(1, a) = regions[0].p(0, a);
      for (std::size_t a = 0; a < d; ++a) regions[0].f(1, a) = regions[0].f(0, a);
    }
    for (const auto& r : regions) perm.push_back(shuffled(r, rng));
    EXPECT_EQ(shifts_of(v, regions, p, 2), shifts_of(v, perm, p, 2)) << to_string(v) << " trial " << trial;
  }
}

TEST_P(CsmVariants, GradientsMatchFiniteDifferences) {
  auto r = lrl::testing::csm_gradient_suite(GetParam(), 20, 0xC5A);
  EXPECT_EQ(r.instances, 20u);
  EXPECT_GT(r.checked, 100u);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

INSTANTIATE_TEST_SUITE_P(All, CsmVariants,
                         ::testing::Values(CsmVariant::csm1, CsmVariant::csm2, CsmVariant::csm3, CsmVariant::csm4,
                                           CsmVariant::csm5),
                         [](const auto& info) { return to_string(info.param); });

class CsmSimilarities : public ::testing::TestWithParam<Similarity> {};

TEST_P(CsmSimilarities, Csm2GradientsMatchFiniteDifferences) {
  auto r = lrl::testing::csm_gradient_suite(CsmVariant::csm2, 8, 0x51, GetParam());
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

INSTANTIATE_TEST_SUITE_P(All, CsmSimilarities,
                         ::testing::Values(Similarity::sub, Similarity::sum, Similarity::cat, Similarity::dot,
                                           Similarity::hadamard),
                         [](const auto& info) { return to_string(info.param); });

TEST(CsmSettingsParse, VariantNames) {
  EXPECT_EQ(parse_csm_variant("csm3"), CsmVariant::csm3);
  EXPECT_EQ(parse_csm_variant("off"), CsmVariant::off);
  EXPECT_THROW(parse_csm_variant("csm6"), ArgumentError);
}
