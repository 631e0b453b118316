#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "premir/errors.hpp"
#include "premir/folding.hpp"

using namespace premir;

namespace {

std::string random_rna(std::mt19937_64& rng, std::size_t len) {
  std::string s;
  for (std::size_t i = 0; i < len; ++i) s += "ACGU"[rng() % 4];
  return s;
}

char complement(char c) {
  switch (c) {
    case 'A': return 'U';
    case 'U': return 'A';
    case 'G': return 'C';
    default: return 'G';
  }
}

}  // namespace

TEST(Fold, HairpinGGGAAACCC) {
  auto ss = fold("GGGAAACCC");
  EXPECT_EQ(ss.dot_bracket, "(((...)))");
  EXPECT_EQ(ss.pairs.size(), 3u);
  EXPECT_EQ(ss.gc_pairs, 3u);
  EXPECT_EQ(ss.hairpin_count, 1u);
  EXPECT_DOUBLE_EQ(ss.energy, oracle::brute_force_mfe("GGGAAACCC"));
  EXPECT_DOUBLE_EQ(ss.energy, -8.5);
}

TEST(Fold, NoPairs) {
  auto ss = fold("AAAAAA");
  EXPECT_EQ(ss.dot_bracket, "......");
  EXPECT_TRUE(ss.pairs.empty());
  EXPECT_EQ(ss.energy, 0.0);
}

TEST(Fold, MatchesBruteForceUpTo12) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const std::string s = random_rna(rng, 1 + rng() % 12);
    auto ss = fold(s);
    EXPECT_EQ(ss.energy, oracle::brute_force_mfe(s)) << s;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (auto p : ss.pairs) pairs.emplace_back(p.i, p.j);
    EXPECT_EQ(oracle::energy(s, pairs), ss.energy) << s;
  }
}

TEST(Fold, StructureInvariants) {
  std::mt19937_64 rng(6);
  EnergyModel model;
  for (int trial = 0; trial < 200; ++trial) {
    const std::string s = random_rna(rng, 5 + rng() % 100);
    auto ss = fold(s);
    EXPECT_LE(ss.energy, 0.0);
    EXPECT_EQ(ss.dot_bracket.size(), s.size());
    EXPECT_EQ(parse_dot_bracket(ss.dot_bracket), ss.pairs);
    EXPECT_EQ(to_dot_bracket(ss.pairs, s.size()), ss.dot_bracket);
    for (auto [i, j] : ss.pairs) {
      EXPECT_TRUE(model.can_pair(s[i], s[j]));
      EXPECT_GE(j - i - 1, 3u);
    }
    for (std::size_t a = 0; a < ss.pairs.size(); ++a) {
      for (std::size_t b = 0; b < ss.pairs.size(); ++b) {
        auto p = ss.pairs[a];
        auto q = ss.pairs[b];
        EXPECT_FALSE(p.i < q.i && q.i < p.j && p.j < q.j);
      }
    }
    EXPECT_DOUBLE_EQ(evaluate_energy(s, ss.pairs), ss.energy);
  }
}

TEST(Fold, NonComplementaryIsZero) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::string s;
    const std::size_t len = 1 + rng() % 60;
    for (std::size_t i = 0; i < len; ++i) s += "AC"[rng() % 2];
    EXPECT_EQ(fold(s).energy, 0.0);
  }
}

TEST(Fold, ReverseComplementPalindromeSymmetry) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::string half = random_rna(rng, 4 + rng() % 30);
    std::string s = half;
    for (auto it = half.rbegin(); it != half.rend(); ++it) s += complement(*it);
    const std::string rev(s.rbegin(), s.rend());
    EXPECT_DOUBLE_EQ(fold(s).energy, fold(rev).energy) << s;
  }
}

TEST(Fold, ReversalPreservesEnergy) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::string s = random_rna(rng, 5 + rng() % 60);
    const std::string rev(s.rbegin(), s.rend());
    EXPECT_DOUBLE_EQ(fold(s).energy, fold(rev).energy) << s;
  }
}

TEST(DotBracket, Bijection) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const std::string s = random_rna(rng, 1 + rng() % 11);
    oracle::enumerate_structures(s, [&](const oracle::Pairs& pairs) {
      std::vector<BasePair> bp;
      for (auto [i, j] : pairs) bp.push_back({i, j});
      std::sort(bp.begin(), bp.end());
      const std::string db = to_dot_bracket(bp, s.size());
      EXPECT_EQ(parse_dot_bracket(db), bp);
    });
  }
  EXPECT_THROW(parse_dot_bracket("(()"), DataError);
  EXPECT_THROW(parse_dot_bracket("())"), DataError);
}

TEST(MakeStructure, RejectsInvalidPairs) {
  EXPECT_THROW(make_structure("GGGAAACCC", {{0, 8}, {1, 9}}), DataError);
  EXPECT_THROW(make_structure("GGGAAACCC", {{0, 3}}), DataError);  // loop of 2
  EXPECT_THROW(make_structure("GGGAAACCC", {{0, 5}}), DataError);  // G-A
  EXPECT_THROW(make_structure("GGGGAAAACCCC", {{0, 11}, {0, 10}}), DataError);
}

TEST(PairingStats, Hairpin) {
  auto ss = fold("GGGAAACCC");
  auto st = pairing_stats(ss);
  EXPECT_EQ(st.at("|G-C|"), 3.0);
  EXPECT_EQ(st.at("|A-U|"), 0.0);
  EXPECT_EQ(st.at("|G-U|"), 0.0);
  EXPECT_EQ(st.at("total_bases"), 6.0);
  EXPECT_EQ(st.at("stems"), 1.0);
  EXPECT_EQ(st.at("loops"), 1.0);
  EXPECT_EQ(st.at("Avg_BP_Stem"), 3.0);
  EXPECT_EQ(st.at("IH"), 9.0);
  EXPECT_EQ(st.at("IL"), 3.0);
  EXPECT_EQ(st.at("IC"), 3.0);
  EXPECT_DOUBLE_EQ(st.at("%L"), 3.0 / 9.0);
}

TEST(PairingStats, Empty) {
  auto st = pairing_stats(fold("AAAAAA"));
  EXPECT_EQ(st.at("|G-C|"), 0.0);
  EXPECT_EQ(st.at("|A-U|"), 0.0);
  EXPECT_EQ(st.at("total_bases"), 0.0);
  EXPECT_EQ(st.at("stems"), 0.0);
  EXPECT_EQ(st.at("Avg_BP_Stem"), 0.0);
  EXPECT_EQ(st.at("%L"), 0.0);
}

TEST(PairingStats, TwoStemsWithBulge) {
  // Stems split by an unpaired base on one side: 3 + 2 pairs.
  auto ss = make_structure("GGGAGGAAAACCCCC", {{0, 14}, {1, 13}, {2, 12}, {4, 11}, {5, 10}});
  EXPECT_EQ(ss.stem_count, 2u);
  EXPECT_EQ(ss.max_consecutive_pairs, 3u);
  EXPECT_EQ(ss.hairpin_count, 1u);
  EXPECT_DOUBLE_EQ(pairing_stats(ss).at("Avg_BP_Stem"), 2.5);
}

TEST(TreeConnectivity, SimpleCases) {
  EXPECT_EQ(tree_connectivity(fold("AAAAAA")), 0.0);
  // One stem: exterior loop and hairpin joined by one edge; Laplacian
  // eigenvalues {0, 2}.
  EXPECT_NEAR(tree_connectivity(fold("GGGAAACCC")), 2.0, 1e-12);
  // Two hairpins in the exterior loop: a 3-vertex path, eigenvalues {0,1,3}.
  auto ss = make_structure("GGGAAACCCGGGAAACCC", {{0, 8}, {1, 7}, {2, 6}, {9, 17}, {10, 16}, {11, 15}});
  EXPECT_NEAR(tree_connectivity(ss), 1.0, 1e-12);
  EXPECT_TRUE(has_multiple_loops(ss));
}

TEST(Ensemble, EfeMatchesBruteForce) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const std::string s = random_rna(rng, 1 + rng() % 12);
    for (double t : {0.5, 1.0, 2.0}) {
      BoltzmannEnsemble ens(s, t);
      EXPECT_NEAR(ens.ensemble_free_energy(), oracle::brute_force_efe(s, t), 1e-9) << s << " T=" << t;
      EXPECT_DOUBLE_EQ(ens.mfe(), oracle::brute_force_mfe(s));
    }
  }
}

TEST(Ensemble, SamplingFrequenciesMatchBoltzmann) {
  const std::string s = "GGGAAACCCU";
  const double t = 1.0;
  std::map<std::string, double> expected;
  double z = 0.0;
  oracle::enumerate_structures(s, [&](const oracle::Pairs& pairs) {
    std::vector<BasePair> bp;
    for (auto [i, j] : pairs) bp.push_back({i, j});
    std::sort(bp.begin(), bp.end());
    const double w = std::exp(-oracle::energy(s, pairs) / t);
    expected[to_dot_bracket(bp, s.size())] += w;
    z += w;
  });
  BoltzmannEnsemble ens(s, t);
  Rng rng(1);
  const std::size_t n = 20000;
  std::map<std::string, double> seen;
  for (auto& sample : ens.sample(n, rng)) seen[to_dot_bracket(sample, s.size())] += 1.0 / n;
  for (auto& [db, w] : expected) {
    const double p = w / z;
    EXPECT_NEAR(seen[db], p, 4.0 * std::sqrt(p * (1 - p) / n) + 1e-3) << db;
  }
}

TEST(FilterMultipleLoops, DropsTwoHairpins) {
  auto ds = make_dataset({{"one", "GGGGAAAACCCC"}, {"two", "GGGGAAAACCCCAGGGGAAAACCCC"}}, {}, "t");
  auto kept = filter_multiple_loops(ds);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept.examples[0].sequence.id, "one");
}
