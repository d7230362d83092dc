#include <gtest/gtest.h>

#include <map>
#include <set>

#include "asif/error.hpp"
#include "asif/mechanisms.hpp"
#include "asif/parallel.hpp"
#include "test_data.hpp"

using namespace asif;

namespace {

std::string key(const AssignmentVector& z) {
  std::string s;
  for (auto v : z.values()) s += v ? '1' : '0';
  return s;
}

// Pearson chi-square of observed counts against equal expected counts.
double chi_square_uniform(const std::map<std::string, std::size_t>& counts, std::size_t cells,
                          std::size_t total) {
  const double expected = static_cast<double>(total) / static_cast<double>(cells);
  double chi = 0.0;
  for (const auto& [k, c] : counts) {
    const double d = static_cast<double>(c) - expected;
    chi += d * d / expected;
  }
  chi += static_cast<double>(cells - counts.size()) * expected;  // empty cells
  return chi;
}

// 0.999 quantiles of the chi-square distribution.
constexpr double kChi2_999_df9 = 27.877164871256568;
constexpr double kChi2_999_df8 = 26.12448155837614;

}  // namespace

TEST(DrawComplete, TwoPointUniform) {
  std::size_t first = 0;
  for (std::uint64_t m = 0; m < 20000; ++m) {
    Rng rng = Rng::for_draw(1, 1, m);
    const auto z = draw_complete(2, 1, rng);
    EXPECT_EQ(z.n_treated(), 1u);
    first += z[0];
  }
  EXPECT_NEAR(first / 20000.0, 0.5, 0.015);
}

TEST(DrawComplete, Preconditions) {
  Rng rng(1);
  EXPECT_THROW(draw_complete(4, 4, rng), InputError);
  EXPECT_THROW(draw_complete(4, 0, rng), InputError);
}

TEST(DrawComplete, FrequenciesMatchEnumeration) {
  const auto all = enumerate_complete(5, 2);
  ASSERT_EQ(all.size(), 10u);
  std::map<std::string, std::size_t> counts;
  constexpr std::size_t kDraws = 100000;
  for (std::uint64_t m = 0; m < kDraws; ++m) {
    Rng rng = Rng::for_draw(2024, 3, m);
    const auto z = draw_complete(5, 2, rng);
    ASSERT_EQ(z.n_treated(), 2u);
    ++counts[key(z)];
  }
  for (const auto& z : all) {
    EXPECT_NEAR(static_cast<double>(counts[key(z)]) / kDraws, 0.1, 0.005) << key(z);
  }
  EXPECT_EQ(counts.size(), 10u);
  EXPECT_LT(chi_square_uniform(counts, 10, kDraws), kChi2_999_df9);
}

TEST(DrawBlock, ProductOfUniforms) {
  const BlockMechanism spec({"A", "A", "A", "B", "B", "B"}, {{"A", 1}, {"B", 1}});
  std::map<std::string, std::size_t> counts;
  constexpr std::size_t kDraws = 90000;
  for (std::uint64_t m = 0; m < kDraws; ++m) {
    Rng rng = Rng::for_draw(7, 2, m);
    const auto z = draw_block(spec, rng);
    ASSERT_EQ(z[0] + z[1] + z[2], 1);
    ASSERT_EQ(z[3] + z[4] + z[5], 1);
    ++counts[key(z)];
  }
  ASSERT_EQ(counts.size(), 9u);
  for (const auto& [k, c] : counts) {
    EXPECT_NEAR(static_cast<double>(c) / kDraws, 1.0 / 9.0, 0.006) << k;
  }
  EXPECT_LT(chi_square_uniform(counts, 9, kDraws), kChi2_999_df8);
}

TEST(DrawBlock, TwoBlocksOfTwo) {
  const BlockMechanism spec({"x", "y", "x", "y"}, {{"x", 1}, {"y", 1}});
  std::map<std::string, std::size_t> counts;
  for (std::uint64_t m = 0; m < 40000; ++m) {
    Rng rng = Rng::for_draw(9, 2, m);
    ++counts[key(draw_block(spec, rng))];
  }
  ASSERT_EQ(counts.size(), 4u);
  for (const auto& [k, c] : counts) EXPECT_NEAR(c / 40000.0, 0.25, 0.01) << k;
}

TEST(DrawBlock, SingleBlockMatchesComplete) {
  const BlockMechanism spec(std::vector<std::string>(5, "only"), {{"only", 2}});
  std::map<std::string, std::size_t> counts;
  constexpr std::size_t kDraws = 50000;
  for (std::uint64_t m = 0; m < kDraws; ++m) {
    Rng rng = Rng::for_draw(5, 9, m);
    ++counts[key(draw_block(spec, rng))];
  }
  EXPECT_EQ(counts.size(), 10u);
  EXPECT_LT(chi_square_uniform(counts, 10, kDraws), kChi2_999_df9);
}

TEST(BlockMechanism, Validation) {
  EXPECT_THROW(BlockMechanism({"a", "a", "b"}, {{"a", 1}, {"b", 1}}), InputError);
  EXPECT_THROW(BlockMechanism({"a", "a"}, {{"a", 1}, {"c", 1}}), InputError);
  EXPECT_THROW(BlockMechanism({"a", "a"}, {}), InputError);
  const auto observed = asif::testing::av({1, 0, 0, 1, 1, 0});
  const auto from = BlockMechanism::from_observed({"a", "a", "a", "b", "b", "b"}, observed);
  EXPECT_EQ(from.treated_counts(), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(from.block_names(), (std::vector<std::string>{"a", "b"}));
}

TEST(DrawBernoulli, SymmetricConditioning) {
  std::size_t first = 0;
  std::size_t rejections = 0;
  for (std::uint64_t m = 0; m < 20000; ++m) {
    Rng rng = Rng::for_draw(3, 5, m);
    const auto d = draw_bernoulli(std::vector<double>{0.5, 0.5}, rng);
    ASSERT_EQ(d.assignment.n_treated(), 1u);
    first += d.assignment[0];
    rejections += d.redraws;
  }
  EXPECT_NEAR(first / 20000.0, 0.5, 0.015);
  // Each attempt is degenerate with probability 1/2: mean redraws is 1.
  EXPECT_NEAR(rejections / 20000.0, 1.0, 0.05);
}

TEST(DrawBernoulli, MarginalsMatchConditionalEnumeration) {
  const std::vector<double> p = {0.9, 0.1};
  // Oracle: enumerate the four outcomes and condition on non-degeneracy.
  double accepted = 0.0, first_treated = 0.0, second_treated = 0.0;
  for (int a = 0; a <= 1; ++a) {
    for (int b = 0; b <= 1; ++b) {
      if (a == b) continue;
      const double w = (a ? p[0] : 1 - p[0]) * (b ? p[1] : 1 - p[1]);
      accepted += w;
      first_treated += a * w;
      second_treated += b * w;
    }
  }
  const double expect_first = first_treated / accepted;  // 0.81 / 0.82
  const double expect_second = second_treated / accepted;
  std::size_t f = 0, s = 0;
  constexpr std::size_t kDraws = 100000;
  for (std::uint64_t m = 0; m < kDraws; ++m) {
    Rng rng = Rng::for_draw(11, 5, m);
    const auto d = draw_bernoulli(p, rng);
    f += d.assignment[0];
    s += d.assignment[1];
  }
  EXPECT_NEAR(static_cast<double>(f) / kDraws, expect_first, 0.005);
  EXPECT_NEAR(static_cast<double>(s) / kDraws, expect_second, 0.005);
}

TEST(DrawBernoulli, RedrawTallyEqualsRejections) {
  const std::vector<double> p = {0.2, 0.15, 0.1};
  for (std::uint64_t m = 0; m < 500; ++m) {
    Rng rng = Rng::for_draw(77, 1, m);
    const auto d = draw_bernoulli(p, rng);
    EXPECT_GT(d.assignment.n_treated(), 0u);
    EXPECT_LT(d.assignment.n_treated(), 3u);
    // Replay the same stream, counting degenerate attempts independently.
    Rng replay = Rng::for_draw(77, 1, m);
    std::size_t rejected = 0;
    while (true) {
      std::size_t t = 0;
      for (double pi : p) t += replay.uniform() < pi ? 1 : 0;
      if (t > 0 && t < p.size()) break;
      ++rejected;
    }
    EXPECT_EQ(d.redraws, rejected);
  }
}

TEST(DrawBernoulli, Errors) {
  BernoulliMechanism bad{{0.0, 0.5}};
  EXPECT_THROW(bad.validate(), InputError);
  BernoulliMechanism one{{0.5}};
  EXPECT_THROW(one.validate(), InputError);
  Rng rng(3);
  EXPECT_THROW(draw_bernoulli(std::vector<double>{1e-9, 1e-9}, rng, 5), CapExceededError);
}

TEST(EnumerateComplete, Examples) {
  EXPECT_EQ(enumerate_complete(4, 2).size(), 6u);
  const auto three = enumerate_complete(3, 1);
  ASSERT_EQ(three.size(), 3u);
  EXPECT_EQ(key(three[0]), "100");
  EXPECT_EQ(key(three[1]), "010");
  EXPECT_EQ(key(three[2]), "001");
  const auto seventy = enumerate_complete(8, 4);
  std::set<std::string> unique;
  for (const auto& z : seventy) {
    EXPECT_EQ(z.n_treated(), 4u);
    unique.insert(key(z));
  }
  EXPECT_EQ(seventy.size(), 70u);
  EXPECT_EQ(unique.size(), 70u);
  EXPECT_THROW(enumerate_complete(40, 20), CapExceededError);
  EXPECT_THROW(enumerate_complete(10, 5, 100), CapExceededError);
}

TEST(Binomial, Values) {
  EXPECT_EQ(binomial(4, 2), 6u);
  EXPECT_EQ(binomial(8, 4), 70u);
  EXPECT_EQ(binomial(40, 20), 137846528820ull);
  EXPECT_EQ(binomial(3, 5), 0u);
  EXPECT_EQ(binomial(200, 100), UINT64_MAX);
}

TEST(RngProperty, SubstreamsAreOrderIndependent) {
  const CompleteMechanism cr{50, 20};
  std::vector<std::string> sequential(300);
  for (std::uint64_t m = 0; m < 300; ++m) {
    Rng rng = Rng::for_draw(42, 1, m);
    sequential[m] = key(draw(cr, rng).assignment);
  }
  std::vector<std::string> parallel(300);
  parallel_for(300, 4, [&](std::size_t b, std::size_t e) {
    for (std::size_t m = e; m-- > b;) {  // reverse order within each chunk
      Rng rng = Rng::for_draw(42, 1, m);
      parallel[m] = key(draw(cr, rng).assignment);
    }
  });
  EXPECT_EQ(sequential, parallel);
  Rng a = Rng::for_draw(42, 1, 0), b = Rng::for_draw(42, 2, 0), c = Rng::for_draw(43, 1, 0);
  const auto va = a(), vb = b(), vc = c();
  EXPECT_NE(va, vb);
  EXPECT_NE(va, vc);
}

TEST(RngProperty, BelowIsUnbiased) {
  Rng rng(5);
  std::vector<std::size_t> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.below(7)];
  for (auto c : counts) EXPECT_NEAR(c / 70000.0, 1.0 / 7.0, 0.01);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}
