#include <gtest/gtest.h>

#include <cmath>

#include "ispasp/mlp.hpp"
#include "ispasp/pruner.hpp"
#include "ispasp/synthetic.hpp"

using namespace ispasp;
using namespace ispasp::prune;

namespace {

double max_rel_err(const DenseMatrix& a, const DenseMatrix& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double x = a.data()[k], y = b.data()[k];
    m = std::max(m, std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1e-6}));
  }
  return m;
}

}  // namespace

TEST(Importance, EqualsGradientOfReconstructionLoss) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto w1 = synthetic::gen_standard_normal(6, 9, seed);
    const auto h = synthetic::gen_compressible({9, 4, 0.5, 1.0, seed});
    const IndexSet active(9, {1, 4, 7});
    const DenseMatrix u_prime = matmul(w1, row_restrict(h, active));
    const DenseMatrix v = matmul(w1, h) - u_prime;
    EXPECT_LT(max_rel_err(importance(w1, v), importance_fd(w1, h, u_prime)), 1e-6);
  }
}

TEST(Step, HandComputedIdentityCase) {
  const auto w1 = DenseMatrix::identity(4);
  const auto h = DenseMatrix::from_column_major(4, 1, {4, 3, 2, 1});
  PruneState st = init_state(w1, h);
  EXPECT_TRUE(st.active.empty());
  st = ispasp_step(std::move(st), w1, h, 2, SelectionPolicy::Value);
  EXPECT_EQ(to_string(st.active), "{0,1}");
  EXPECT_EQ(st.t, 1u);
  EXPECT_DOUBLE_EQ(frobenius_norm(st.residual), std::sqrt(5.0));
  // Stable afterwards.
  st = ispasp_step(std::move(st), w1, h, 2, SelectionPolicy::Value);
  EXPECT_EQ(to_string(st.active), "{0,1}");
}

TEST(Step, PolicyChangesCandidateSet) {
  // y = w1ᵀ w1 h = (-1, 3, 0.5): neuron 0 has the largest activity but a
  // negative importance, so only the magnitude policy admits it.
  const auto w1 = DenseMatrix::from_rows({{1, -3, 0}, {0, 0, 1}});
  const auto h = DenseMatrix::from_column_major(3, 1, {5.0, 2.0, 0.5});
  const PruneState by_value = ispasp_step(init_state(w1, h), w1, h, 1, SelectionPolicy::Value);
  const PruneState by_mag = ispasp_step(init_state(w1, h), w1, h, 1, SelectionPolicy::Magnitude);
  EXPECT_EQ(to_string(by_value.active), "{1}");
  EXPECT_EQ(to_string(by_mag.active), "{0}");
}

TEST(Step, ZeroImportanceNeuronsAreNotSelected) {
  // A neuron with zero activity never enters the support.
  const auto w1 = synthetic::gen_standard_normal(5, 6, 2);
  auto h = synthetic::gen_exact_row_sparse(6, 3, 2, 4);
  const auto truth = row_support(h);
  const PruneState st = ispasp_step(init_state(w1, h), w1, h, 4, SelectionPolicy::Value);
  EXPECT_TRUE(st.active.is_subset_of(truth));
}

TEST(Prune, FullWidthGivesZeroResidual) {
  const auto w1 = synthetic::gen_gaussian_weight(20, 20, 1);
  const auto h = synthetic::gen_compressible({20, 15, 0.5, 1.0, 2});
  PruneParams params;
  params.s = 20;
  const auto r = ispasp_prune_hidden(w1, h, params);
  EXPECT_EQ(r.active.size(), 20u);
  EXPECT_LE(r.trace.back().residual_norm * r.trace.back().residual_norm, 1e-20);
}

TEST(Prune, ActiveSetNeverExceedsS) {
  const auto w1 = synthetic::gen_gaussian_weight(30, 50, 3);
  const auto h = synthetic::gen_compressible({50, 20, 0.7, 1.0, 4});
  for (std::size_t s : {1, 3, 10, 25, 50}) {
    PruneParams params;
    params.s = s;
    const auto r = ispasp_prune_hidden(w1, h, params);
    EXPECT_LE(r.active.size(), s);
    ASSERT_EQ(r.trace.size(), params.iterations);
    for (const auto& rec : r.trace) EXPECT_LE(rec.active_size, s);
  }
}

TEST(Prune, ExactRecoveryOfPlantedSupport) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto w1 = synthetic::gen_gaussian_rip(400, 40, seed);
    const auto h = synthetic::gen_exact_row_sparse(40, 30, 8, seed + 100);
    PruneParams params;
    params.s = 8;
    const auto r = ispasp_prune_hidden(w1, h, params);
    EXPECT_EQ(r.active, row_support(h)) << "seed " << seed;
    EXPECT_LE(r.trace.back().residual_norm / frobenius_norm(matmul(w1, h)), 1e-8);
  }
}

TEST(Prune, EarlyStopShortensTrace) {
  const auto w1 = synthetic::gen_gaussian_rip(400, 40, 1);
  const auto h = synthetic::gen_exact_row_sparse(40, 30, 8, 2);
  PruneParams params;
  params.s = 8;
  params.early_stop = true;
  params.stable_rounds = 2;
  const auto r = ispasp_prune_hidden(w1, h, params);
  EXPECT_LT(r.trace.size(), params.iterations);
  EXPECT_EQ(r.active, row_support(h));
}

TEST(Prune, ResampledRunIsDeterministic) {
  const TwoLayerNet net(synthetic::gen_gaussian_weight(40, 10, 1), synthetic::gen_gaussian_weight(5, 40, 2));
  auto run = [&] {
    std::uint64_t draw = 0;
    PruneParams params;
    params.s = 6;
    params.resample = true;
    return ispasp_prune(net, [&] { return synthetic::gen_standard_normal(10, 16, draw++); }, params);
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.active, b.active);
  for (std::size_t t = 0; t < a.trace.size(); ++t) EXPECT_EQ(a.trace[t].residual_norm, b.trace[t].residual_norm);
}

TEST(Prune, ParamValidation) {
  PruneParams p;
  p.s = 0;
  EXPECT_THROW(p.validate(10), RangeError);
  p.s = 11;
  EXPECT_THROW(p.validate(10), RangeError);
  p.s = 5;
  p.iterations = 0;
  EXPECT_THROW(p.validate(10), RangeError);
}

TEST(Gfs, MatchesBruteForceGreedy) {
  const TwoLayerNet net(synthetic::gen_gaussian_weight(12, 5, 7), synthetic::gen_gaussian_weight(3, 12, 8));
  const auto x = synthetic::gen_standard_normal(5, 40, 9);
  Batch batch{x, std::vector<int>(40)};
  for (std::size_t j = 0; j < 40; ++j) batch.labels[j] = static_cast<int>(j % 3);

  // Oracle: evaluate every extension of the current set with the full network code path.
  std::vector<std::size_t> chosen;
  for (std::size_t step = 0; step < 4; ++step) {
    double best = INFINITY;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < 12; ++i) {
      if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
      auto trial = chosen;
      trial.push_back(i);
      const double loss = cross_entropy(forward(extract_subnetwork(net, IndexSet(12, trial)), x), batch.labels);
      if (loss < best) {
        best = loss;
        best_i = i;
      }
    }
    chosen.push_back(best_i);
  }

  GfsParams params;
  params.s = 4;
  const auto got = gfs_prune(net, [&] { return batch; }, params);
  EXPECT_EQ(got, IndexSet(12, chosen));
}

TEST(Gfs, PoolLimitsCandidates) {
  const TwoLayerNet net(synthetic::gen_gaussian_weight(30, 5, 1), synthetic::gen_gaussian_weight(3, 30, 2));
  Batch batch{synthetic::gen_standard_normal(5, 20, 3), std::vector<int>(20, 1)};
  GfsParams params;
  params.s = 10;
  params.candidate_pool = 5;
  params.seed = 4;
  const auto a = gfs_prune(net, [&] { return batch; }, params);
  EXPECT_EQ(a.size(), 10u);
  EXPECT_EQ(a, gfs_prune(net, [&] { return batch; }, params));
}

TEST(TopK, SelectsLargestAggregateActivation) {
  const TwoLayerNet net(DenseMatrix::from_rows({{1}, {3}, {2}, {-1}}), DenseMatrix(1, 4, 1.0));
  const auto x = DenseMatrix::from_rows({{1, 2}});
  EXPECT_EQ(to_string(topk_prune(net, x, 2)), "{1,2}");
}

TEST(Multilayer, FullWidthKeepsOutput) {
  const MultiLayerNet net({synthetic::gen_gaussian_weight(12, 6, 1), synthetic::gen_gaussian_weight(10, 12, 2),
                           synthetic::gen_gaussian_weight(3, 10, 3)});
  const auto x = synthetic::gen_standard_normal(6, 25, 4);
  std::vector<PruneParams> per(2);
  per[0].s = 12;
  per[1].s = 10;
  const auto r = ispasp_prune_multilayer(net, [&] { return x; }, per);
  const auto dense = forward_multi(net, x), pruned = forward_multi(r.pruned, x);
  // Dead neurons are dropped, so the kept width may be smaller but the output is unchanged.
  for (std::size_t k = 0; k < dense.size(); ++k) EXPECT_NEAR(dense.data()[k], pruned.data()[k], 1e-10);
}

TEST(Multilayer, CompactsEveryHiddenLayer) {
  const MultiLayerNet net({synthetic::gen_gaussian_weight(20, 6, 1), synthetic::gen_gaussian_weight(15, 20, 2),
                           synthetic::gen_gaussian_weight(3, 15, 3)});
  std::uint64_t draw = 0;
  std::vector<PruneParams> per(2);
  per[0].s = 5;
  per[1].s = 4;
  const auto r = ispasp_prune_multilayer(net, [&] { return synthetic::gen_standard_normal(6, 32, 10 + draw++); }, per);
  ASSERT_EQ(r.active.size(), 2u);
  EXPECT_LE(r.pruned.weights[0].rows(), 5u);
  EXPECT_EQ(r.pruned.weights[1].cols(), r.pruned.weights[0].rows());
  EXPECT_LE(r.pruned.weights[1].rows(), 4u);
  EXPECT_EQ(r.pruned.weights[2].cols(), r.pruned.weights[1].rows());
  EXPECT_EQ(r.pruned.weights[2].rows(), 3u);
}
