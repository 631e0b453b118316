#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "premir/errors.hpp"
#include "premir/features.hpp"
#include "premir/shuffle.hpp"

using namespace premir;

namespace {

double get(const NamedValues& v, std::string_view name) {
  for (const auto& [n, x] : v) {
    if (n == name) return x;
  }
  ADD_FAILURE() << "missing " << name;
  return std::nan("");
}

std::string random_rna(std::mt19937_64& rng, std::size_t len) {
  std::string s;
  for (std::size_t i = 0; i < len; ++i) s += "ACGU"[rng() % 4];
  return s;
}

FeatureConfig fast_config() {
  FeatureConfig c;
  c.n_samples = 20;
  c.n_shuffles = 10;
  return c;
}

}  // namespace

TEST(FeatureNames, CatalogueAndSubset) {
  const auto& names = feature_names();
  EXPECT_EQ(std::set<std::string>(names.begin(), names.end()).size(), names.size());
  EXPECT_EQ(names[0], "AA");
  EXPECT_EQ(names[16], "AAA");
  const std::vector<std::string> expected = {
      "A+U%", "AG", "AU", "CU", "GA", "UU", "MFEI4", "dPs", "EAFE", "Freq",
      "dH/L", "Tm", "Tm/L", "|G-C|/L", "|A-U|%/n_stems", "|G-U|%/n_stems", "L", "CE/L", "zG", "zSP"};
  EXPECT_EQ(selected20_names(), expected);
  EXPECT_EQ(&subset_names("full"), &feature_names());
  EXPECT_THROW(subset_names("58"), UsageError);
  EXPECT_THROW(feature_index("nope"), DataError);
}

TEST(Composition, HandCounts) {
  auto aaa = composition_features({"x", "AAA"});
  EXPECT_EQ(get(aaa, "AA"), 1.0);
  EXPECT_EQ(get(aaa, "AAA"), 1.0);
  EXPECT_EQ(get(aaa, "A+U%"), 1.0);

  auto acgu = composition_features({"x", "ACGU"});
  EXPECT_DOUBLE_EQ(get(acgu, "AC"), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(get(acgu, "CG"), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(get(acgu, "GU"), 1.0 / 3.0);
  EXPECT_EQ(get(acgu, "A+U%"), 0.5);

  auto auau = composition_features({"x", "AUAU"});
  EXPECT_DOUBLE_EQ(get(auau, "AU"), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(get(auau, "UA"), 1.0 / 3.0);
  EXPECT_EQ(get(auau, "G+C%"), 0.0);
  EXPECT_EQ(get(auau, "L"), 4.0);
}

TEST(Composition, TooShortNamesFeature) {
  try {
    composition_features({"tiny", "AC"});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("XYZ"), std::string::npos);
  }
}

TEST(Composition, SimplexProperty) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    auto v = composition_features({"r", random_rna(rng, 3 + rng() % 158)});
    double di = 0.0, tri = 0.0;
    for (std::size_t i = 0; i < 16; ++i) di += v[i].second;
    for (std::size_t i = 16; i < 80; ++i) tri += v[i].second;
    EXPECT_NEAR(di, 1.0, 1e-12);
    EXPECT_NEAR(tri, 1.0, 1e-12);
    EXPECT_NEAR(get(v, "A+U%") + get(v, "G+C%"), 1.0, 1e-12);
  }
}

TEST(Structure, HairpinValues) {
  const RnaSequence seq{"x", "GGGAAACCC"};
  const auto ss = fold(seq.bases);
  auto v = structure_features(seq, ss);
  EXPECT_DOUBLE_EQ(get(v, "dP"), 6.0 / 9.0);
  EXPECT_DOUBLE_EQ(get(v, "dG"), ss.energy / 9.0);
  EXPECT_DOUBLE_EQ(get(v, "MFEI1"), (ss.energy / 9.0) / (6.0 / 9.0));
  EXPECT_DOUBLE_EQ(get(v, "MFEI2"), ss.energy / 9.0);
  EXPECT_DOUBLE_EQ(get(v, "MFEI4"), ss.energy / 9.0 / 6.0);
  EXPECT_DOUBLE_EQ(get(v, "BP/GC"), 2.0);
  EXPECT_EQ(get(v, "BP/AU"), 0.0);
  EXPECT_EQ(get(v, "G/C"), 6.0);
  EXPECT_EQ(get(v, "Avg_BP_Stem"), 3.0);
  EXPECT_DOUBLE_EQ(get(v, "|G-C|/L"), 3.0 / 9.0);
  EXPECT_EQ(get(v, "|G-C|%/n_stems"), 1.0);
  EXPECT_EQ(get(v, "IH"), 9.0);
  EXPECT_EQ(get(v, "IL"), 3.0);
  EXPECT_EQ(get(v, "IC"), 3.0);
}

TEST(Structure, ZeroDenominators) {
  const RnaSequence unpaired{"x", "AAAAAA"};
  auto v = structure_features(unpaired, fold(unpaired.bases));
  EXPECT_EQ(get(v, "dP"), 0.0);
  EXPECT_EQ(get(v, "MFEI4"), 0.0);
  EXPECT_EQ(get(v, "MFEI2"), 0.0);
  EXPECT_EQ(get(v, "MFEI3"), 0.0);
  EXPECT_EQ(get(v, "%L"), 0.0);

  // No G or C at all, but pairs exist.
  const RnaSequence no_gc{"y", "AAAAUUUUUU"};
  auto w = structure_features(no_gc, fold(no_gc.bases));
  EXPECT_EQ(get(w, "MFEI1"), 0.0);
  EXPECT_LT(get(w, "dG"), 0.0);
}

TEST(Thermo, ZeroAndLinear) {
  const RnaSequence unpaired{"x", "AAAAAA"};
  auto z = thermo_features(unpaired, fold(unpaired.bases));
  EXPECT_EQ(get(z, "dH"), 0.0);
  EXPECT_EQ(get(z, "dS"), 0.0);
  EXPECT_EQ(get(z, "Tm"), 0.0);

  ThermoTable table;
  const RnaSequence hp{"y", "GGGAAACCC"};
  auto v = thermo_features(hp, fold(hp.bases), table);
  EXPECT_DOUBLE_EQ(get(v, "dH"), 3.0 * table.dh_gc);
  EXPECT_DOUBLE_EQ(get(v, "dS"), 3.0 * table.ds_gc);
  EXPECT_GE(get(v, "Tm"), table.tm_min);
  EXPECT_LE(get(v, "Tm"), table.tm_max);
}

TEST(Thermo, AddingGcPairNeverLowersTm) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    SecondaryStructure ss;
    ss.au_pairs = rng() % 30;
    ss.gc_pairs = rng() % 30;
    ss.gu_pairs = rng() % 10;
    ss.pairs.resize(ss.au_pairs + ss.gc_pairs + ss.gu_pairs);
    if (ss.pairs.empty()) continue;
    const RnaSequence seq{"x", std::string(160, 'A')};
    const double before = get(thermo_features(seq, ss), "Tm");
    ss.gc_pairs += 1;
    ss.pairs.emplace_back();
    EXPECT_GE(get(thermo_features(seq, ss), "Tm"), before);
  }
}

TEST(Ensemble, SingleStructureHasZeroEntropy) {
  // At a very low temperature the lone possible pair dominates completely.
  auto v = ensemble_features({"x", "GAAAC"}, 200, 1, 0.01);
  EXPECT_EQ(get(v, "Freq"), 1.0);
  EXPECT_EQ(get(v, "dQ"), 0.0);
  EXPECT_EQ(get(v, "dD"), 0.0);
}

TEST(Ensemble, NoPairsGivesZeros) {
  auto v = ensemble_features({"x", "AAAAAA"}, 50, 1);
  for (const auto& [name, value] : v) EXPECT_EQ(value, 0.0) << name;
}

TEST(Ensemble, TwoEquiprobableStructures) {
  const std::string bases = "GGAAACCAAAAA";
  const std::vector<BasePair> a = {{0, 6}};
  const std::vector<BasePair> b = {{1, 5}};
  std::vector<std::vector<BasePair>> samples;
  for (int k = 0; k < 50; ++k) {
    samples.push_back(a);
    samples.push_back(b);
  }
  const auto mfe = make_structure(bases, a);
  auto v = summarize_ensemble(bases, samples, mfe, -3.0);
  const double len = static_cast<double>(bases.size());
  EXPECT_NEAR(get(v, "dQ"), std::log(2.0) / len, 1e-15);
  EXPECT_NEAR(get(v, "dD"), 0.5 / len, 1e-15);
  EXPECT_EQ(get(v, "Freq"), 0.5);
  // Bases 0, 1, 5, 6 each paired half the time: entropy ln 2 apiece.
  EXPECT_NEAR(get(v, "dPs"), 4.0 * std::log(2.0) / len, 1e-15);
  // No pair above 0.5, so the centroid is empty.
  EXPECT_EQ(get(v, "CE/L"), 0.0);
  EXPECT_DOUBLE_EQ(get(v, "EAFE"), -3.0 / len);
}

TEST(ZScores, HomopolymerIsZero) {
  auto v = zscore_features({"x", std::string(40, 'A')}, 10, 1, fast_config());
  for (const auto& [name, value] : v) EXPECT_EQ(value, 0.0) << name;
  auto g = zscore_features({"x", std::string(40, 'G')}, 10, 1, fast_config());
  for (const auto& [name, value] : g) EXPECT_EQ(value, 0.0) << name;
}

TEST(ZScores, DeterministicAndStrongHairpinNegative) {
  const RnaSequence hp{"x", "GGACUGCAUAAAAUGCAGUCC"};
  auto a = zscore_features(hp, 100, 7);
  auto b = zscore_features(hp, 100, 7);
  EXPECT_EQ(a, b);
  EXPECT_LT(get(a, "zG"), 0.0);
  EXPECT_THROW(zscore_features(hp, 9, 7), UsageError);
}

TEST(ZScores, SingletonShuffleClassGivesZeroEnergyScore) {
  // GGGGAAAACCCC is the only sequence with its dinucleotide counts and end
  // bases, so every shuffle reproduces it and the MFE-based scores vanish.
  Rng rng(1);
  EXPECT_EQ(dinucleotide_shuffle("GGGGAAAACCCC", rng), "GGGGAAAACCCC");
  auto z = zscore_features({"x", "GGGGAAAACCCC"}, 100, 7);
  EXPECT_EQ(get(z, "zG"), 0.0);
  EXPECT_EQ(get(z, "zP"), 0.0);
}

TEST(ZScores, MeanNearZeroOnShuffledSequences) {
  // A sequence drawn from its own shuffle distribution should not look
  // special against that distribution.
  std::mt19937_64 gen(4);
  FeatureConfig config;
  config.n_samples = 20;
  const std::size_t trials = 200;
  std::map<std::string, double> mean;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::string base = random_rna(gen, 30);
    Rng rng(gen());
    const RnaSequence seq{"s", dinucleotide_shuffle(base, rng)};
    for (const auto& [name, value] : zscore_features(seq, 100, gen(), config)) mean[name] += value / trials;
  }
  for (const auto& [name, m] : mean) EXPECT_LT(std::abs(m), 0.2) << name;
}

TEST(ExtractAll, TotalDeterministicAndFinite) {
  std::mt19937_64 rng(5);
  const auto config = fast_config();
  for (const std::string s : {"AAA", "GGG", "ACG", "AAAAAAAAAAAAAAAAAAAA", "AUAUAUAUAUAUAU", "GGGGAAAACCCC"}) {
    const auto v = extract_all({"x", s}, config);
    for (double x : v.values()) EXPECT_TRUE(std::isfinite(x)) << s;
  }
  for (int trial = 0; trial < 20; ++trial) {
    const RnaSequence seq{"r", random_rna(rng, 3 + rng() % 100)};
    const auto a = extract_all(seq, config);
    const auto b = extract_all(seq, config);
    EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
    EXPECT_EQ(a.select(selected20_names()).size(), 20u);
  }
}

TEST(ExtractMatrix, RowsMatchExtractAllAndErrorsNameSequence) {
  const auto config = fast_config();
  const std::vector<RnaSequence> seqs = {{"a", "GGGGAAAACCCC"}, {"b", "ACGUACGUAC"}};
  const auto m = extract_matrix(seqs, config, selected20_names());
  ASSERT_EQ(m.rows(), 2u);
  for (std::size_t r = 0; r < 2; ++r) {
    const auto expect = extract_all(seqs[r], config).select(selected20_names());
    for (std::size_t c = 0; c < 20; ++c) EXPECT_EQ(m(r, c), expect[c]);
  }
  const std::vector<RnaSequence> bad = {{"ok", "ACGUA"}, {"short_one", "AC"}};
  try {
    extract_matrix(bad, config, selected20_names());
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("short_one"), std::string::npos);
  }
}

TEST(Normalizer, Examples) {
  Matrix train(2, 2);
  train(0, 0) = 0.0;
  train(1, 0) = 10.0;
  train(0, 1) = 3.0;
  train(1, 1) = 3.0;
  const auto stats = fit_normalizer(train);
  const std::vector<double> mid = {5.0, 3.0};
  EXPECT_EQ(apply_normalizer(stats, mid), (std::vector<double>{0.5, 0.0}));
  const std::vector<double> high = {12.0, 100.0};
  EXPECT_EQ(apply_normalizer(stats, high), (std::vector<double>{1.0, 0.0}));
  const std::vector<double> low = {-4.0, -1.0};
  EXPECT_EQ(apply_normalizer(stats, low), (std::vector<double>{0.0, 0.0}));
  EXPECT_THROW(fit_normalizer(Matrix()), DataError);
}

TEST(FeatureCsv, RoundTripIsExact) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> normal(0.0, 1e3);
  FeatureTable t;
  t.names = selected20_names();
  t.values = Matrix(0, 20);
  for (int r = 0; r < 10; ++r) {
    t.ids.push_back("id" + std::to_string(r));
    t.labels.push_back(r % 3 == 0 ? -1 : r % 2);
    std::vector<double> row;
    for (int c = 0; c < 20; ++c) row.push_back(normal(rng));
    t.values.append_row(row);
  }
  const std::string text = write_feature_csv(t);
  const auto back = parse_feature_csv(text);
  EXPECT_EQ(back.names, t.names);
  EXPECT_EQ(back.ids, t.ids);
  EXPECT_EQ(back.labels, t.labels);
  EXPECT_TRUE(std::equal(back.values.data().begin(), back.values.data().end(), t.values.data().begin()));
  EXPECT_EQ(write_feature_csv(back), text);

  const auto sel = select_columns(back, {"zG", "L"});
  EXPECT_EQ(sel.names, (std::vector<std::string>{"zG", "L"}));
  EXPECT_EQ(sel.values(3, 1), t.values(3, 16));

  EXPECT_THROW(parse_feature_csv("name,label,L\nx,positive,1\n"), DataError);
  EXPECT_THROW(parse_feature_csv("id,label,L\nx,positive\n"), DataError);
  EXPECT_THROW(parse_feature_csv("id,label,L\nx,positive,abc\n"), DataError);
}
