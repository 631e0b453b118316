#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "premir/errors.hpp"
#include "premir/sequence_io.hpp"

using namespace premir;

namespace {

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / ("premir_seqio_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(ParseFasta, SingleRecord) {
  auto recs = parse_fasta(">x\nACGU");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].id, "x");
  EXPECT_EQ(recs[0].bases, "ACGU");
  EXPECT_EQ(recs[0].length(), 4u);
}

TEST(ParseFasta, LowercaseAndThymine) {
  auto recs = parse_fasta(">x\nacgt");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].bases, "ACGU");
}

TEST(ParseFasta, DuplicateIdRejected) {
  EXPECT_THROW(parse_fasta(">x\nACGU\n>x\nGG"), DataError);
}

TEST(ParseFasta, MultiLineBodiesAreJoined) {
  auto recs = parse_fasta(">a desc\nACG\nUU\r\n\n>b\nGG GG\n");
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].id, "a");
  EXPECT_EQ(recs[0].bases, "ACGUU");
  EXPECT_EQ(recs[1].bases, "GGGG");
}

TEST(ParseFasta, Errors) {
  EXPECT_THROW(parse_fasta(">x\n"), DataError);
  EXPECT_THROW(parse_fasta(">x\n>y\nAC"), DataError);
  EXPECT_THROW(parse_fasta(">x\nACNU"), DataError);
  EXPECT_THROW(parse_fasta("ACGU\n>x\nAC"), DataError);
  EXPECT_THROW(parse_fasta(">x\n" + std::string(161, 'A')), DataError);
  EXPECT_NO_THROW(parse_fasta(">x\n" + std::string(160, 'A')));
}

TEST(ParseFasta, ErrorNamesRecord) {
  try {
    parse_fasta(">good\nACGU\n>bad_one\nACXU");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("bad_one"), std::string::npos);
  }
}

TEST(ParseFasta, RoundTripRandom) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<RnaSequence> recs;
    const int n = 1 + static_cast<int>(rng() % 6);
    for (int r = 0; r < n; ++r) {
      std::string bases;
      const std::size_t len = 1 + rng() % kMaxSequenceLength;
      for (std::size_t i = 0; i < len; ++i) bases += "ACGU"[rng() % 4];
      recs.push_back({"seq" + std::to_string(r), bases});
    }
    const std::size_t width = 1 + rng() % 80;
    EXPECT_EQ(parse_fasta(serialize_fasta(recs, width)), recs);
  }
}

TEST(LoadDataset, CountsAndLabels) {
  auto dir = temp_dir();
  write_text_file(dir / "pos.fa", ">p1\nACGU\n>p2\nGGCC\n");
  write_text_file(dir / "neg.fa", ">n1\nAAAA\n>n2\nUUUU\n>n3\nCCCC\n");
  auto ds = load_dataset(dir / "pos.fa", dir / "neg.fa");
  EXPECT_EQ(ds.size(), 5u);
  EXPECT_EQ(ds.count(Label::positive), 2u);
  EXPECT_EQ(ds.count(Label::negative), 3u);
  EXPECT_TRUE(ds.warnings.empty());
  EXPECT_EQ(manifest_csv(ds).substr(0, 9), "id,label\n");
}

TEST(LoadDataset, EmptyClassWarns) {
  auto dir = temp_dir();
  write_text_file(dir / "empty.fa", "");
  write_text_file(dir / "one.fa", ">n1\nACGUA\n");
  auto ds = load_dataset(dir / "empty.fa", dir / "one.fa");
  EXPECT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.count(Label::positive), 0u);
  EXPECT_FALSE(ds.warnings.empty());
}

TEST(LoadDataset, ParseErrorCarriesPath) {
  auto dir = temp_dir();
  write_text_file(dir / "broken.fa", ">x\nAXA\n");
  write_text_file(dir / "ok.fa", ">y\nACGU\n");
  try {
    load_dataset(dir / "broken.fa", dir / "ok.fa");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("broken.fa"), std::string::npos);
  }
  EXPECT_THROW(load_dataset(dir / "missing.fa", dir / "ok.fa"), DataError);
}

TEST(LoadDataset, IdsUniqueAcrossClasses) {
  EXPECT_THROW(make_dataset({{"a", "ACGU"}}, {{"a", "GGCC"}}, "t"), DataError);
}
