#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace t1 {

enum class Errc {
  kInvalidInput,
  kDimMismatch,
  kDuplicateId,
  kBadMagic,
  kUnsupportedVersion,
  kTruncated,
  kChecksumMismatch,
  kIo,
  kParse,
  kMissingQrels,
  kTransport,
  kInvariant,
};

inline std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::kInvalidInput: return "invalid-input";
    case Errc::kDimMismatch: return "dim-mismatch";
    case Errc::kDuplicateId: return "duplicate-id";
    case Errc::kBadMagic: return "bad-magic";
    case Errc::kUnsupportedVersion: return "unsupported-version";
    case Errc::kTruncated: return "truncated";
    case Errc::kChecksumMismatch: return "checksum-mismatch";
    case Errc::kIo: return "io";
    case Errc::kParse: return "parse";
    case Errc::kMissingQrels: return "missing-qrels";
    case Errc::kTransport: return "transport";
    case Errc::kInvariant: return "invariant";
  }
  return "unknown";
}

// Single exception type for the toolkit; the code drives CLI exit status.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace t1
