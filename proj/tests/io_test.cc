#include <gtest/gtest.h>

#include <cstring>
#include <sstream>

#include "matchforge/match_io.h"
#include "matchforge/tensor_io.h"
#include "test_util.h"

namespace matchforge {
namespace {

bool BitEqual(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

std::string Hex(std::string_view bytes) {
  std::string out;
  char buf[4];
  for (unsigned char c : bytes) {
    std::snprintf(buf, sizeof(buf), "%02x", c);
    out += buf;
  }
  return out;
}

TEST(TensorIo, TwoByThreeZerosLayout) {
  const Tensor t = MakeTensor({2, 3}, std::vector<float>(6, 0.0f));
  const std::string bytes = SerializeTensor(t);
  ASSERT_EQ(bytes.size(), 4u + 1 + 1 + 8 + 24);
  EXPECT_EQ(Hex(bytes.substr(0, 14)), "4d465431" "00" "02" "02000000" "03000000");
  const Tensor back = ParseTensor(bytes);
  EXPECT_EQ(back.dims, t.dims);
  EXPECT_TRUE(BitEqual(back.values, t.values));
}

TEST(TensorIo, NameBlockLayout) {
  const Tensor t = MakeTensor({2, 1}, {1.0f, 2.0f}, {"ab", "c"});
  const std::string bytes = SerializeTensor(t);
  // header 14 + payload 8 + count 4 + offsets 12 + blob 3
  ASSERT_EQ(bytes.size(), 41u);
  EXPECT_EQ(Hex(bytes.substr(22)),
            "02000000" "00000000" "02000000" "03000000" "616263");
  EXPECT_EQ(ParseTensor(bytes).names, t.names);
}

TEST(TensorIo, RoundTripsBitExactAllRanks) {
  Rng rng(3);
  for (int rank = 1; rank <= 4; ++rank) {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<uint32_t> dims;
      size_t n = 1;
      for (int r = 0; r < rank; ++r) {
        dims.push_back(1 + static_cast<uint32_t>(rng.UniformIndex(4)));
        n *= dims.back();
      }
      std::vector<float> values(n);
      for (float& v : values) {
        // Arbitrary bit patterns, NaNs excluded by construction below.
        const uint32_t bits = static_cast<uint32_t>(rng.Next());
        std::memcpy(&v, &bits, sizeof(v));
        if (v != v) v = static_cast<float>(rng.Normal());
      }
      std::vector<std::string> names;
      if (trial % 2 == 0) {
        for (uint32_t i = 0; i < dims[0]; ++i) {
          names.push_back("img_" + std::to_string(rng.UniformIndex(1000)));
        }
      }
      const Tensor t = MakeTensor(dims, values, names);
      const Tensor back = ParseTensor(SerializeTensor(t));
      EXPECT_EQ(back.dims, dims);
      EXPECT_TRUE(BitEqual(back.values, values));
      EXPECT_EQ(back.names, names);
      EXPECT_EQ(SerializeTensor(back), SerializeTensor(t));
    }
  }
}

TEST(TensorIo, RankFourFileRoundTrip) {
  const auto dir = testing::MakeTempDir("tensor_file");
  std::vector<float> values(16);
  for (int i = 0; i < 16; ++i) values[i] = static_cast<float>(i) * 0.25f;
  const Tensor t = MakeTensor({2, 2, 2, 2}, values);
  WriteTensor((dir / "t.mft").string(), t);
  const Tensor back = ReadTensor((dir / "t.mft").string());
  EXPECT_EQ(back.dims, t.dims);
  EXPECT_TRUE(BitEqual(back.values, values));
}

void ExpectDataError(std::string_view bytes, const std::string& needle) {
  try {
    ParseTensor(bytes);
    FAIL() << "expected DataError containing " << needle;
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos)
        << e.what();
  }
}

TEST(TensorIo, RejectsMalformedInput) {
  const std::string good =
      SerializeTensor(MakeTensor({2, 3}, std::vector<float>(6, 1.0f)));
  ExpectDataError(good.substr(0, good.size() - 4), "truncated");
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  ExpectDataError(bad_magic, "bad magic");
  std::string bad_dtype = good;
  bad_dtype[4] = 1;
  ExpectDataError(bad_dtype, "unsupported dtype");
  std::string bad_rank = good;
  bad_rank[5] = 5;
  ExpectDataError(bad_rank, "malformed header");
  ExpectDataError("", "truncated");
}

TEST(TensorIo, MakeTensorChecksShape) {
  EXPECT_ANY_THROW(MakeTensor({2, 3}, std::vector<float>(5)));
  EXPECT_ANY_THROW(MakeTensor({}, {}));
  EXPECT_ANY_THROW(MakeTensor({2}, {1, 2}, {"only-one"}));
}

TEST(TensorIo, KeypointTableRoundTrip) {
  std::vector<Keypoint> kps(3);
  for (int i = 0; i < 3; ++i) {
    kps[i].x = 10.5 + i;
    kps[i].y = 3.25 * i;
    kps[i].score = 0.125 * i;
    kps[i].scale = 2.0;
    kps[i].orientation = 0.5;
    kps[i].affine = {1.0, 0.5, 0.0, 2.0};
  }
  const std::vector<Keypoint> back =
      KeypointsFromTensor(ParseTensor(SerializeTensor(KeypointsToTensor(kps))));
  ASSERT_EQ(back.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].x, kps[i].x);
    EXPECT_EQ(back[i].y, kps[i].y);
    EXPECT_EQ(back[i].score, kps[i].score);
    EXPECT_EQ(back[i].scale, 2.0);
    EXPECT_EQ(back[i].orientation, 0.5);
    EXPECT_EQ(back[i].affine, kps[i].affine);
  }
  // Two-column tables keep the Keypoint defaults.
  const auto xy = KeypointsFromTensor(MakeTensor({1, 2}, {4.0f, 5.0f}));
  EXPECT_EQ(xy[0].x, 4.0);
  EXPECT_EQ(xy[0].scale, 1.0);
  EXPECT_THROW(KeypointsFromTensor(MakeTensor({1, 6}, std::vector<float>(6))),
               DataError);
}

MatchArchive SampleArchive() {
  MatchArchive a;
  a.images = {{"a.jpg", 5}, {"b.jpg", 4}, {"c.jpg", 2}};
  a.pairs.push_back({"a.jpg", "b.jpg", {{0, 3, 0.5f}, {2, 1, 0.25f}}});
  a.pairs.push_back({"a.jpg", "c.jpg", {}});
  a.pairs.push_back({"b.jpg", "c.jpg", {{3, 1, 1.0f}}});
  return a;
}

TEST(MatchArchiveIo, RoundTripsBitExact) {
  const MatchArchive a = SampleArchive();
  const std::string bytes = SerializeMatchArchive(a);
  const MatchArchive back = ParseMatchArchive(bytes);
  EXPECT_EQ(SerializeMatchArchive(back), bytes);
  ASSERT_EQ(back.pairs.size(), 3u);
  EXPECT_EQ(back.pairs[0].matches[1].idx_a, 2u);
  EXPECT_EQ(back.pairs[0].matches[1].confidence, 0.25f);
  EXPECT_EQ(back.images[1].num_keypoints, 4u);

  const auto dir = testing::MakeTempDir("archive_file");
  WriteMatchArchive((dir / "m.mfa").string(), a);
  EXPECT_EQ(SerializeMatchArchive(ReadMatchArchive((dir / "m.mfa").string())),
            bytes);
}

TEST(MatchArchiveIo, HeaderLayout) {
  MatchArchive a;
  a.images = {{"x", 1}};
  const std::string bytes = SerializeMatchArchive(a);
  EXPECT_EQ(Hex(bytes),
            "4d464d41" "01000000" "01000000" "01000000" "78" "01000000"
            "00000000");
}

TEST(MatchArchiveIo, RejectsInvalidArchives) {
  MatchArchive out_of_range = SampleArchive();
  out_of_range.pairs[2].matches[0].idx_b = 2;
  EXPECT_THROW(SerializeMatchArchive(out_of_range), DataError);

  MatchArchive unsorted = SampleArchive();
  std::swap(unsorted.pairs[0], unsorted.pairs[1]);
  EXPECT_THROW(SerializeMatchArchive(unsorted), DataError);

  MatchArchive flipped = SampleArchive();
  std::swap(flipped.pairs[0].id_a, flipped.pairs[0].id_b);
  EXPECT_THROW(SerializeMatchArchive(flipped), DataError);

  const std::string bytes = SerializeMatchArchive(SampleArchive());
  EXPECT_THROW(ParseMatchArchive(bytes.substr(0, bytes.size() - 1)),
               DataError);
  EXPECT_THROW(ParseMatchArchive(bytes + "x"), DataError);
  std::string bad_magic = bytes;
  bad_magic[3] = 'B';
  EXPECT_THROW(ParseMatchArchive(bad_magic), DataError);
}

TEST(MatchArchiveIo, ToArchivePairCanonicalizes) {
  MatchSet set{"b", "a", {{3, 0, 0.f, 0.5f}, {1, 2, 0.f, 0.25f}}};
  const MatchArchive::Pair p = ToArchivePair(set);
  EXPECT_EQ(p.id_a, "a");
  EXPECT_EQ(p.id_b, "b");
  ASSERT_EQ(p.matches.size(), 2u);
  EXPECT_EQ(p.matches[0].idx_a, 0u);
  EXPECT_EQ(p.matches[0].idx_b, 3u);
  EXPECT_EQ(p.matches[1].idx_a, 2u);
  EXPECT_EQ(p.matches[1].idx_b, 1u);
}

// Independent reader of the pairwise text grammar:
//   file  := pair*
//   pair  := name ' ' name '\n' (uint ' ' uint '\n')* '\n'
struct ParsedPair {
  std::string a, b;
  std::vector<std::pair<uint32_t, uint32_t>> matches;
  bool operator==(const ParsedPair&) const = default;
};

std::vector<ParsedPair> ParsePairText(const std::string& text) {
  std::vector<ParsedPair> out;
  size_t pos = 0;
  auto next_line = [&]() {
    const size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) throw std::runtime_error("missing LF");
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    return line;
  };
  while (pos < text.size()) {
    ParsedPair p;
    const std::string header = next_line();
    const size_t sp = header.find(' ');
    if (sp == std::string::npos || header.find(' ', sp + 1) != std::string::npos) {
      throw std::runtime_error("bad header");
    }
    p.a = header.substr(0, sp);
    p.b = header.substr(sp + 1);
    for (std::string line = next_line(); !line.empty(); line = next_line()) {
      const size_t s = line.find(' ');
      if (s == std::string::npos) throw std::runtime_error("bad match line");
      for (char c : line) {
        if (c != ' ' && (c < '0' || c > '9')) {
          throw std::runtime_error("non-decimal");
        }
      }
      p.matches.emplace_back(std::stoul(line.substr(0, s)),
                             std::stoul(line.substr(s + 1)));
    }
    out.push_back(std::move(p));
  }
  return out;
}

TEST(PairText, SinglePairExample) {
  MatchSet set{"a.jpg", "b.jpg", {{0, 3, 0.f, 1.f}, {2, 1, 0.f, 1.f}}};
  EXPECT_EQ(FormatPairMatchesText(std::vector<MatchSet>{set}),
            "a.jpg b.jpg\n0 3\n2 1\n\n");
}

TEST(PairText, ZeroPairsIsEmpty) {
  EXPECT_EQ(FormatPairMatchesText(std::vector<MatchSet>{}), "");
  const auto dir = testing::MakeTempDir("pair_text");
  ExportPairMatchesText({}, (dir / "m.txt").string());
  EXPECT_EQ(ReadFileBytes((dir / "m.txt").string()), "");
}

TEST(PairText, RejectsWhitespaceNamesAndDuplicates) {
  MatchSet spaced{"a b.jpg", "c.jpg", {}};
  EXPECT_THROW(FormatPairMatchesText(std::vector<MatchSet>{spaced}),
               std::invalid_argument);
  MatchSet tabbed{"a.jpg", "c\t.jpg", {}};
  EXPECT_THROW(FormatPairMatchesText(std::vector<MatchSet>{tabbed}),
               std::invalid_argument);
  MatchSet p1{"a", "b", {}};
  MatchSet p2{"b", "a", {}};
  EXPECT_THROW(FormatPairMatchesText(std::vector<MatchSet>{p1, p2}),
               std::invalid_argument);
}

TEST(PairText, GrammarOracleRoundTrip) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<MatchSet> sets;
    std::vector<ParsedPair> expected;
    const int images = 2 + static_cast<int>(rng.UniformIndex(6));
    for (int i = 0; i < images; ++i) {
      for (int j = 0; j < images; ++j) {
        if (i >= j || rng.Uniform() < 0.4) continue;
        const bool flip = rng.Uniform() < 0.5;
        MatchSet s;
        const std::string ni = "im" + std::to_string(i) + ".png";
        const std::string nj = "im" + std::to_string(j) + ".png";
        s.id_a = flip ? nj : ni;
        s.id_b = flip ? ni : nj;
        ParsedPair p{ni, nj, {}};
        const int m = static_cast<int>(rng.UniformIndex(6));
        for (int k = 0; k < m; ++k) {
          const uint32_t a = static_cast<uint32_t>(rng.UniformIndex(100000));
          const uint32_t b = static_cast<uint32_t>(rng.UniformIndex(100000));
          s.matches.push_back({flip ? b : a, flip ? a : b, 0.f, 1.f});
          p.matches.emplace_back(a, b);
        }
        std::sort(p.matches.begin(), p.matches.end());
        sets.push_back(s);
        expected.push_back(p);
      }
    }
    std::sort(expected.begin(), expected.end(),
              [](const ParsedPair& l, const ParsedPair& r) {
                return std::tie(l.a, l.b) < std::tie(r.a, r.b);
              });
    const std::string text = FormatPairMatchesText(sets);
    EXPECT_EQ(ParsePairText(text), expected);

    // The archive path produces the same bytes.
    MatchArchive archive;
    for (int i = 0; i < images; ++i) {
      archive.images.push_back({"im" + std::to_string(i) + ".png", 100000});
    }
    std::sort(archive.images.begin(), archive.images.end(),
              [](const auto& l, const auto& r) { return l.id < r.id; });
    for (const MatchSet& s : sets) archive.pairs.push_back(ToArchivePair(s));
    std::sort(archive.pairs.begin(), archive.pairs.end(),
              [](const auto& l, const auto& r) {
                return std::tie(l.id_a, l.id_b) < std::tie(r.id_a, r.id_b);
              });
    EXPECT_EQ(FormatPairMatchesText(archive), text);
  }
}

}  // namespace
}  // namespace matchforge
