#include <gtest/gtest.h>

#include <random>

#include "support/oracles.hpp"
#include "vigil/matching.hpp"

using namespace vigil;
using vigil::testing::brute_force_match;
using vigil::testing::random_matrix;

namespace {

SimilarityMatrix dense(const std::vector<std::vector<double>>& rows) {
  SimilarityMatrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m.set(i, j, rows[i][j]);
  return m;
}

std::vector<std::pair<std::size_t, std::size_t>> index_pairs(const std::vector<MatchedPair>& p) {
  std::vector<std::pair<std::size_t, std::size_t>> v;
  for (const auto& q : p) v.emplace_back(q.ref, q.gen);
  return v;
}

double total(const std::vector<MatchedPair>& p) {
  double t = 0.0;
  for (const auto& q : p) t += q.similarity;
  return t;
}

}  // namespace

TEST(Cosine, HandExamples) {
  const std::vector<double> a{1, 0}, b{0, 1}, c{2, 0}, d{1, 0};
  EXPECT_DOUBLE_EQ(cosine_similarity(a, b), 0.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(c, d), 1.0);
  const std::vector<double> e{1, 2, 2}, f{2, 1, 2};
  EXPECT_NEAR(cosine_similarity(e, f), 8.0 / 9.0, 1e-12);
  const std::vector<double> g{-1, 0};
  EXPECT_DOUBLE_EQ(cosine_similarity(a, g), -1.0);
}

TEST(Cosine, Errors) {
  const std::vector<double> a{1, 0}, z{0, 0}, three{1, 2, 3};
  EXPECT_THROW(cosine_similarity(a, z), DegenerateInputError);
  EXPECT_THROW(cosine_similarity(a, three), ValidationError);
}

TEST(SimilarityMatrix, ClassConstraintForbidsCells) {
  const std::vector<LabeledEmbedding> refs{{{1, 0}, "sofa"}};
  const std::vector<LabeledEmbedding> gens{{{1, 0}, "chair"}};
  const auto m = build_similarity_matrix(refs, gens);
  ASSERT_EQ(m.rows(), 1u);
  ASSERT_EQ(m.cols(), 1u);
  EXPECT_TRUE(m.forbidden(0, 0));
}

TEST(SimilarityMatrix, IdenticalSetsHaveUnitDiagonal) {
  const std::vector<LabeledEmbedding> e{{{1, 2, 3}, "a"}, {{0, 1, 0}, "a"}, {{5, 5, 1}, "b"}};
  const auto m = build_similarity_matrix(e, e);
  for (std::size_t i = 0; i < e.size(); ++i) EXPECT_NEAR(*m.at(i, i), 1.0, 1e-12);
}

TEST(SimilarityMatrix, MixedLabelsHandComputed) {
  const std::vector<LabeledEmbedding> refs{{{1, 0}, "hat"}, {{1, 1}, "bag"}};
  const std::vector<LabeledEmbedding> gens{{{0, 3}, "hat"}, {{3, 4}, "bag"}, {{1, 1}, "hat"}};
  const auto m = build_similarity_matrix(refs, gens);
  EXPECT_NEAR(*m.at(0, 0), 0.0, 1e-12);
  EXPECT_TRUE(m.forbidden(0, 1));
  EXPECT_NEAR(*m.at(0, 2), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_TRUE(m.forbidden(1, 0));
  EXPECT_NEAR(*m.at(1, 1), 7.0 / (5.0 * std::sqrt(2.0)), 1e-12);
  EXPECT_TRUE(m.forbidden(1, 2));
}

TEST(SimilarityMatrix, DimensionMismatchThrows) {
  const std::vector<LabeledEmbedding> refs{{{1, 0}, "a"}};
  const std::vector<LabeledEmbedding> gens{{{1, 0, 0}, "b"}};
  EXPECT_THROW(build_similarity_matrix(refs, gens), ValidationError);
}

TEST(MatchObjects, WorkedExample) {
  const auto s = dense({{0.9, 0.2, 0.5}, {0.1, 0.8, 0.4}});
  auto r = match_objects(s, 0.6);
  EXPECT_EQ(r.pairs, (std::vector<MatchedPair>{{0, 0, 0.9}, {1, 1, 0.8}}));
  EXPECT_TRUE(r.omissions.empty());
  r = match_objects(s, 0.85);
  EXPECT_EQ(r.pairs, (std::vector<MatchedPair>{{0, 0, 0.9}}));
  EXPECT_EQ(r.omissions, (std::vector<std::size_t>{1}));
  EXPECT_EQ(r.rejected, (std::vector<MatchedPair>{{1, 1, 0.8}}));
}

TEST(MatchObjects, NoGeneratedObjects) {
  SimilarityMatrix m(3, 0);
  const auto r = match_objects(m, 0.1);
  EXPECT_TRUE(r.pairs.empty());
  EXPECT_EQ(r.omissions, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(MatchObjects, ThresholdIsStrict) {
  const auto r = match_objects(dense({{0.5}}), 0.5);
  EXPECT_TRUE(r.pairs.empty());
  EXPECT_EQ(r.omissions, (std::vector<std::size_t>{0}));
}

TEST(MatchObjects, AssignsBeforeFiltering) {
  // Greedy per-row thresholding would give r0->g0 and leave r1 unmatched;
  // the global assignment prefers r0->g1, r1->g0 (1.3 > 0.95).
  const auto r = match_objects(dense({{0.95, 0.7}, {0.6, 0.0}}), 0.5);
  EXPECT_EQ(index_pairs(r.pairs), (std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 0}}));
}

TEST(MatchObjects, ForbiddenRowBecomesOmission) {
  SimilarityMatrix m(2, 2);
  m.set(0, 0, 0.9);
  m.set(0, 1, 0.8);
  const auto r = match_objects(m, 0.1);
  EXPECT_EQ(index_pairs(r.pairs), (std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}}));
  EXPECT_EQ(r.omissions, (std::vector<std::size_t>{1}));
}

TEST(MatchObjects, NegativeSimilaritiesAreNotForced) {
  const auto r = match_objects(dense({{-0.4, -0.2}}), -1.0);
  EXPECT_TRUE(r.pairs.empty());
  EXPECT_TRUE(r.rejected.empty());
}

TEST(MatchObjects, TauOutOfRangeThrows) {
  EXPECT_THROW(match_objects(dense({{0.5}}), 1.5), ValidationError);
  EXPECT_THROW(match_objects(dense({{0.5}}), std::nan("")), ValidationError);
}

TEST(MatchObjects, TiesResolveToSmallestPairs) {
  const auto r = match_objects(dense({{0.5, 0.5}, {0.5, 0.5}}), 0.0);
  EXPECT_EQ(index_pairs(r.pairs), (std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 1}}));
}

TEST(MatchObjects, AgreesWithBruteForce) {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t n = rng() % 6 + 1, k = rng() % 6 + 1;
    const double forbid = (rng() % 11) / 10.0;
    const double quantum = trial % 3 == 0 ? 0.25 : 0.0;
    const auto m = random_matrix(rng, n, k, forbid, quantum);
    const auto brute = brute_force_match(m);
    const auto got = optimal_assignment(m);
    ASSERT_NEAR(total(got), brute.total, 1e-9) << "trial " << trial;
    ASSERT_EQ(index_pairs(got), index_pairs(brute.pairs)) << "trial " << trial;
    const double tau = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    const auto r = match_objects(m, tau);
    std::vector<MatchedPair> expect;
    for (const auto& p : brute.pairs)
      if (p.similarity > tau) expect.push_back(p);
    ASSERT_EQ(index_pairs(r.pairs), index_pairs(expect)) << "trial " << trial;
  }
}

TEST(MatchObjects, ResultInvariants) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const auto m = random_matrix(rng, rng() % 7, rng() % 7, 0.3);
    const double tau = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    const auto r = match_objects(m, tau);
    std::vector<int> ref_seen(m.rows(), 0), gen_seen(m.cols(), 0);
    for (const auto& p : r.pairs) {
      EXPECT_GT(p.similarity, tau);
      EXPECT_FALSE(m.forbidden(p.ref, p.gen));
      ++ref_seen[p.ref];
      ++gen_seen[p.gen];
    }
    for (auto o : r.omissions) ++ref_seen[o];
    for (auto c : ref_seen) EXPECT_EQ(c, 1);
    for (auto c : gen_seen) EXPECT_LE(c, 1);
  }
}

TEST(MatchObjects, TauMonotone) {
  std::mt19937 rng(6);
  for (int trial = 0; trial < 300; ++trial) {
    const auto m = random_matrix(rng, 1 + rng() % 6, 1 + rng() % 6, 0.3);
    double t1 = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    double t2 = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    if (t1 > t2) std::swap(t1, t2);
    const auto lo = match_objects(m, t1), hi = match_objects(m, t2);
    for (const auto& p : hi.pairs) EXPECT_NE(std::find(lo.pairs.begin(), lo.pairs.end(), p), lo.pairs.end());
    EXPECT_GE(hi.omissions.size(), lo.omissions.size());
  }
}

TEST(MatchObjects, ScaleInvariant) {
  std::mt19937 rng(8);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  const std::vector<std::string> labels{"a", "b"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<LabeledEmbedding> refs(1 + rng() % 5), gens(1 + rng() % 5);
    for (auto* side : {&refs, &gens})
      for (auto& e : *side) {
        e.vector.resize(16);
        for (auto& v : e.vector) v = g(rng);
        e.class_label = labels[rng() % 2];
      }
    const auto base = build_similarity_matrix(refs, gens);
    auto scaled_refs = refs, scaled_gens = gens;
    for (auto* side : {&scaled_refs, &scaled_gens})
      for (auto& e : *side) {
        const double s = scale(rng);
        for (auto& v : e.vector) v *= s;
      }
    const auto scaled = build_similarity_matrix(scaled_refs, scaled_gens);
    for (std::size_t i = 0; i < base.rows(); ++i)
      for (std::size_t j = 0; j < base.cols(); ++j) {
        ASSERT_EQ(base.forbidden(i, j), scaled.forbidden(i, j));
        if (!base.forbidden(i, j)) {
          ASSERT_NEAR(*base.at(i, j), *scaled.at(i, j), 1e-9);
        }
      }
    EXPECT_EQ(index_pairs(match_objects(base, 0.1).pairs), index_pairs(match_objects(scaled, 0.1).pairs));
  }
}

TEST(MatchObjects, PermutingGeneratedObjectsPermutesResult) {
  std::mt19937 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 5, k = 1 + rng() % 5;
    const auto m = random_matrix(rng, n, k, 0.2);
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    SimilarityMatrix p(n, k);  // column perm[j] of p is column j of m
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < k; ++j) p.set(i, perm[j], m.at(i, j));
    const auto a = match_objects(m, 0.0), b = match_objects(p, 0.0);
    ASSERT_EQ(a.pairs.size(), b.pairs.size());
    for (std::size_t q = 0; q < a.pairs.size(); ++q) {
      EXPECT_EQ(a.pairs[q].ref, b.pairs[q].ref);
      EXPECT_EQ(perm[a.pairs[q].gen], b.pairs[q].gen);
    }
  }
}
