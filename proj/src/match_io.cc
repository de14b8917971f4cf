#include "matchforge/match_io.h"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <tuple>

#include "byte_io.h"
#include "matchforge/tensor_io.h"

namespace matchforge {
namespace {

constexpr std::string_view kArchiveMagic = "MFMA";
constexpr uint32_t kArchiveVersion = 1;

bool IsTextSafeName(std::string_view name) {
  if (name.empty()) return false;
  for (char c : name) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
        c == '\f') {
      return false;
    }
  }
  return true;
}

struct CanonicalPair {
  std::string name_a;
  std::string name_b;
  std::vector<std::pair<uint32_t, uint32_t>> matches;
};

std::string FormatCanonical(std::vector<CanonicalPair> pairs) {
  for (const CanonicalPair& p : pairs) {
    for (const std::string* name : {&p.name_a, &p.name_b}) {
      if (!IsTextSafeName(*name)) {
        throw std::invalid_argument(
            "image name '" + *name +
            "' is empty or contains whitespace; the text format cannot "
            "represent it");
      }
    }
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const CanonicalPair& l, const CanonicalPair& r) {
              return std::tie(l.name_a, l.name_b) <
                     std::tie(r.name_a, r.name_b);
            });
  for (size_t i = 1; i < pairs.size(); ++i) {
    if (pairs[i].name_a == pairs[i - 1].name_a &&
        pairs[i].name_b == pairs[i - 1].name_b) {
      throw std::invalid_argument("duplicate pair " + pairs[i].name_a + " " +
                                  pairs[i].name_b);
    }
  }

  std::string out;
  for (CanonicalPair& p : pairs) {
    std::sort(p.matches.begin(), p.matches.end());
    out += p.name_a;
    out += ' ';
    out += p.name_b;
    out += '\n';
    for (const auto& [a, b] : p.matches) {
      out += std::to_string(a);
      out += ' ';
      out += std::to_string(b);
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

}  // namespace

MatchArchive::Pair ToArchivePair(const MatchSet& matches) {
  MatchArchive::Pair pair;
  const bool swap = matches.id_b < matches.id_a;
  pair.id_a = swap ? matches.id_b : matches.id_a;
  pair.id_b = swap ? matches.id_a : matches.id_b;
  pair.matches.reserve(matches.size());
  for (const Match& m : matches.matches) {
    pair.matches.push_back(swap ? MatchArchive::Entry{m.idx_b, m.idx_a,
                                                      m.confidence}
                                : MatchArchive::Entry{m.idx_a, m.idx_b,
                                                      m.confidence});
  }
  if (swap) {
    std::sort(pair.matches.begin(), pair.matches.end(),
              [](const auto& l, const auto& r) {
                return std::tie(l.idx_a, l.idx_b) < std::tie(r.idx_a, r.idx_b);
              });
  }
  return pair;
}

void ValidateMatchArchive(const MatchArchive& archive) {
  std::map<std::string_view, uint32_t> counts;
  for (size_t i = 0; i < archive.images.size(); ++i) {
    if (i > 0 && !(archive.images[i - 1].id < archive.images[i].id)) {
      throw DataError("archive images not sorted/unique at " +
                      archive.images[i].id);
    }
    counts[archive.images[i].id] = archive.images[i].num_keypoints;
  }
  for (size_t i = 0; i < archive.pairs.size(); ++i) {
    const MatchArchive::Pair& p = archive.pairs[i];
    if (!(p.id_a < p.id_b)) {
      throw DataError("archive pair not canonical: " + p.id_a + " " + p.id_b);
    }
    if (i > 0) {
      const MatchArchive::Pair& q = archive.pairs[i - 1];
      if (!(std::tie(q.id_a, q.id_b) < std::tie(p.id_a, p.id_b))) {
        throw DataError("archive pairs not sorted/unique at " + p.id_a + " " +
                        p.id_b);
      }
    }
    const auto it_a = counts.find(p.id_a);
    const auto it_b = counts.find(p.id_b);
    if (it_a == counts.end() || it_b == counts.end()) {
      throw DataError("archive pair references undeclared image: " + p.id_a +
                      " " + p.id_b);
    }
    for (const MatchArchive::Entry& m : p.matches) {
      if (m.idx_a >= it_a->second || m.idx_b >= it_b->second) {
        throw DataError("archive match index out of range in pair " + p.id_a +
                        " " + p.id_b);
      }
    }
  }
}

std::string SerializeMatchArchive(const MatchArchive& archive) {
  ValidateMatchArchive(archive);
  internal::ByteWriter w;
  w.PutBytes(kArchiveMagic);
  w.PutU32(kArchiveVersion);
  w.PutU32(static_cast<uint32_t>(archive.images.size()));
  for (const auto& image : archive.images) {
    w.PutString(image.id);
    w.PutU32(image.num_keypoints);
  }
  w.PutU32(static_cast<uint32_t>(archive.pairs.size()));
  for (const auto& pair : archive.pairs) {
    w.PutString(pair.id_a);
    w.PutString(pair.id_b);
    w.PutU32(static_cast<uint32_t>(pair.matches.size()));
    for (const auto& m : pair.matches) {
      w.PutU32(m.idx_a);
      w.PutU32(m.idx_b);
      w.PutF32(m.confidence);
    }
  }
  return w.Release();
}

MatchArchive ParseMatchArchive(std::string_view bytes) {
  if (bytes.size() < kArchiveMagic.size() ||
      bytes.substr(0, kArchiveMagic.size()) != kArchiveMagic) {
    throw DataError("bad magic: not an MFMA match archive");
  }
  internal::ByteReader r(bytes.substr(kArchiveMagic.size()));
  const uint32_t version = r.GetU32();
  if (version != kArchiveVersion) {
    throw DataError("unsupported archive version " + std::to_string(version));
  }
  MatchArchive archive;
  const uint32_t num_images = r.GetU32();
  for (uint32_t i = 0; i < num_images; ++i) {
    MatchArchive::Image image;
    image.id = r.GetString();
    image.num_keypoints = r.GetU32();
    archive.images.push_back(std::move(image));
  }
  const uint32_t num_pairs = r.GetU32();
  for (uint32_t i = 0; i < num_pairs; ++i) {
    MatchArchive::Pair pair;
    pair.id_a = r.GetString();
    pair.id_b = r.GetString();
    const uint32_t num_matches = r.GetU32();
    if (r.remaining() / 12 < num_matches) {
      throw DataError("truncated match list in pair " + pair.id_a + " " +
                      pair.id_b);
    }
    pair.matches.resize(num_matches);
    for (auto& m : pair.matches) {
      m.idx_a = r.GetU32();
      m.idx_b = r.GetU32();
      m.confidence = r.GetF32();
    }
    archive.pairs.push_back(std::move(pair));
  }
  if (!r.AtEnd()) throw DataError("trailing bytes after match archive");
  ValidateMatchArchive(archive);
  return archive;
}

void WriteMatchArchive(const std::string& path, const MatchArchive& archive) {
  WriteFileBytes(path, SerializeMatchArchive(archive));
}

MatchArchive ReadMatchArchive(const std::string& path) {
  try {
    return ParseMatchArchive(ReadFileBytes(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::string FormatPairMatchesText(const std::vector<MatchSet>& pairs) {
  std::vector<CanonicalPair> canonical;
  canonical.reserve(pairs.size());
  for (const MatchSet& ms : pairs) {
    const MatchArchive::Pair p = ToArchivePair(ms);
    CanonicalPair c{p.id_a, p.id_b, {}};
    for (const auto& m : p.matches) c.matches.emplace_back(m.idx_a, m.idx_b);
    canonical.push_back(std::move(c));
  }
  return FormatCanonical(std::move(canonical));
}

std::string FormatPairMatchesText(const MatchArchive& archive) {
  std::vector<CanonicalPair> canonical;
  canonical.reserve(archive.pairs.size());
  for (const auto& p : archive.pairs) {
    CanonicalPair c{p.id_a, p.id_b, {}};
    for (const auto& m : p.matches) c.matches.emplace_back(m.idx_a, m.idx_b);
    canonical.push_back(std::move(c));
  }
  return FormatCanonical(std::move(canonical));
}

void ExportPairMatchesText(const std::vector<MatchSet>& pairs,
                           const std::string& path) {
  WriteFileBytes(path, FormatPairMatchesText(pairs));
}

}  // namespace matchforge
