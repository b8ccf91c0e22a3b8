#pragma once

// Exact brute-force dense index. Embeddings are L2-normalized and rounded to
// binary32 on ingestion, so s(q,d) is a dot product equal to cosine and the
// on-disk file reproduces the in-memory index bit for bit.
//
// File layout (little-endian):
//   "T1IX" | version u16 | dim u32 | count u64
//   count x ( id_len u16 | id bytes | dim x f32 )
//   crc32 u32 over every preceding byte

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "t1/embedding.hpp"
#include "t1/error.hpp"

namespace t1 {

struct IndexEntry {
  std::string doc_id;
  Embedding embedding;
};

struct SearchHit {
  std::string doc_id;
  double score = 0.0;

  friend bool operator==(const SearchHit&, const SearchHit&) = default;
};

// Non-increasing score, ties by ascending doc_id.
inline bool hit_order(const SearchHit& a, const SearchHit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.doc_id < b.doc_id;
}

inline constexpr std::array<char, 4> kIndexMagic = {'T', '1', 'I', 'X'};
inline constexpr std::uint16_t kIndexVersion = 1;

class Index {
 public:
  Index() = default;

  static Index build(std::vector<IndexEntry> entries) {
    require(!entries.empty(), Errc::kInvalidInput, "cannot build an empty index");
    const std::size_t dim = entries.front().embedding.dim();
    std::unordered_set<std::string_view> seen;
    for (const auto& e : entries) {
      require(e.embedding.dim() == dim, Errc::kDimMismatch,
              "entry '" + e.doc_id + "' has dim " + std::to_string(e.embedding.dim()) + ", expected " +
                  std::to_string(dim));
      require(e.doc_id.size() <= 0xFFFF, Errc::kInvalidInput, "doc id longer than 65535 bytes");
      require(seen.insert(e.doc_id).second, Errc::kDuplicateId, "duplicate doc id '" + e.doc_id + "'");
    }
    for (auto& e : entries) {
      e.embedding.normalize();
      e.embedding.round_to_float();
    }
    return Index(dim, std::move(entries));
  }

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<IndexEntry>& entries() const noexcept { return entries_; }

  // Scores for every entry in storage order. The query is normalized first.
  std::vector<double> score_all(const Embedding& query) const {
    const Embedding q = prepared(query);
    std::vector<double> scores(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) scores[i] = dot(q.values(), entries_[i].embedding.values());
    return scores;
  }

  std::vector<SearchHit> search_topk(const Embedding& query, std::size_t k) const {
    require(k > 0, Errc::kInvalidInput, "k must be positive");
    const auto scores = score_all(query);
    std::vector<SearchHit> hits;
    hits.reserve(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) hits.push_back({entries_[i].doc_id, scores[i]});
    const std::size_t n = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(), hit_order);
    hits.resize(n);
    return hits;
  }

  std::vector<std::uint8_t> serialize() const;
  static Index deserialize(std::span<const std::uint8_t> bytes);

  void save(const std::filesystem::path& path) const;
  static Index load(const std::filesystem::path& path);

  friend bool operator==(const Index& a, const Index& b) {
    if (a.dim_ != b.dim_ || a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
      if (a.entries_[i].doc_id != b.entries_[i].doc_id) return false;
      if (!std::ranges::equal(a.entries_[i].embedding.values(), b.entries_[i].embedding.values())) return false;
    }
    return true;
  }

 private:
  Index(std::size_t dim, std::vector<IndexEntry> entries) : dim_(dim), entries_(std::move(entries)) {}

  Embedding prepared(const Embedding& query) const {
    require(query.dim() == dim_, Errc::kDimMismatch,
            "query dim " + std::to_string(query.dim()) + " != index dim " + std::to_string(dim_));
    if (query.normalized()) return query;
    Embedding q = query;
    q.normalize();
    return q;
  }

  std::size_t dim_ = 0;
  std::vector<IndexEntry> entries_;
};

namespace detail {

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes_.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
  void put_f32(float value) { put(std::bit_cast<std::uint32_t>(value)); }
  void put_bytes(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return value;
  }
  float get_f32(const char* what) { return std::bit_cast<float>(get<std::uint32_t>(what)); }
  std::string get_string(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      fail(Errc::kTruncated, std::string("index file ends inside ") + what + " at byte " + std::to_string(pos_));
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = ::crc32(crc, bytes.data() + off, n);
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

inline std::vector<std::uint8_t> Index::serialize() const {
  detail::ByteWriter w;
  w.put_bytes(std::string_view(kIndexMagic.data(), kIndexMagic.size()));
  w.put<std::uint16_t>(kIndexVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(dim_));
  w.put<std::uint64_t>(entries_.size());
  for (const auto& e : entries_) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(e.doc_id.size()));
    w.put_bytes(e.doc_id);
    for (double v : e.embedding.values()) w.put_f32(static_cast<float>(v));
  }
  w.put<std::uint32_t>(detail::crc32_of(w.bytes()));
  return std::move(w.bytes());
}

inline Index Index::deserialize(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  if (bytes.size() < kIndexMagic.size() ||
      !std::equal(kIndexMagic.begin(), kIndexMagic.end(), bytes.begin(),
                  [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; })) {
    fail(Errc::kBadMagic, "not a T1IX index file");
  }
  r.get_string(kIndexMagic.size(), "magic");
  const auto version = r.get<std::uint16_t>("header");
  require(version == kIndexVersion, Errc::kUnsupportedVersion, "index version " + std::to_string(version));
  const auto dim = r.get<std::uint32_t>("header");
  const auto count = r.get<std::uint64_t>("header");
  require(dim > 0, Errc::kInvalidInput, "index header has dim 0");
  require(count > 0, Errc::kInvalidInput, "index header has zero entries");

  // Structure first, checksum second, value validation last, so corruption in
  // the vectors reports as a checksum mismatch rather than a bad value.
  std::vector<std::pair<std::string, std::vector<double>>> raw;
  raw.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, r.remaining() / (2 + 4ull * dim))));
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto id_len = r.get<std::uint16_t>("entry id length");
    std::string id = r.get_string(id_len, "entry id");
    std::vector<double> values(dim);
    for (double& v : values) v = static_cast<double>(r.get_f32("entry vector"));
    raw.emplace_back(std::move(id), std::move(values));
  }
  const std::size_t payload_end = r.pos();
  const auto stored_crc = r.get<std::uint32_t>("checksum");
  require(r.remaining() == 0, Errc::kParse, "trailing bytes after index checksum");
  const auto actual_crc = detail::crc32_of(bytes.first(payload_end));
  require(stored_crc == actual_crc, Errc::kChecksumMismatch, "index checksum mismatch");

  std::vector<IndexEntry> entries;
  entries.reserve(raw.size());
  std::unordered_set<std::string> seen;
  for (auto& [id, values] : raw) {
    require(seen.insert(id).second, Errc::kDuplicateId, "duplicate doc id '" + id + "' in index file");
    entries.push_back({std::move(id), Embedding(std::move(values), true)});
  }
  return Index(dim, std::move(entries));
}

inline void Index::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), Errc::kIo, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), Errc::kIo, "write to '" + path.string() + "' failed");
}

inline Index Index::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::kIo, "cannot open index '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace t1
