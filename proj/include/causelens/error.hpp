#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace causelens {

enum class ErrorCode {
  kParse,
  kIo,
  kConfig,
  // lexicon / dataset
  kDomainCount,
  kUnknownDomain,
  kTooFewTriples,
  kDuplicateKey,
  kEmptyPhrase,
  kConnectiveContamination,
  kRepeatedStep,
  // trace bundles
  kUnsupportedVersion,
  kShapeMismatch,
  kChecksumMismatch,
  kMissingBlob,
  kCausalMask,
  kRowNormalization,
  kNonFinite,
  kOffsetRange,
  kAnchorOutOfRange,
  // analysis
  kKeyMismatch,
  kTextMismatch,
  kEmptyComponent,
  kMissingRole,
  kDuplicateRole,
  kEmptyTokenSet,
  kNoValidQueries,
  kEmptyInput,
  kMissingComponent,
  kUndefinedSimilarity,
  kZeroNorm,
  kEmptyProfile,
  kEmptyGeneration,
  kMissingTraces,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kConfig: return "config_error";
    case ErrorCode::kDomainCount: return "domain_count";
    case ErrorCode::kUnknownDomain: return "unknown_domain";
    case ErrorCode::kTooFewTriples: return "too_few_triples";
    case ErrorCode::kDuplicateKey: return "duplicate_key";
    case ErrorCode::kEmptyPhrase: return "empty_phrase";
    case ErrorCode::kConnectiveContamination: return "connective_contamination";
    case ErrorCode::kRepeatedStep: return "repeated_step";
    case ErrorCode::kUnsupportedVersion: return "unsupported_version";
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kChecksumMismatch: return "checksum_mismatch";
    case ErrorCode::kMissingBlob: return "missing_blob";
    case ErrorCode::kCausalMask: return "causal_mask_violation";
    case ErrorCode::kRowNormalization: return "row_normalization";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kOffsetRange: return "offset_out_of_range";
    case ErrorCode::kAnchorOutOfRange: return "anchor_out_of_range";
    case ErrorCode::kKeyMismatch: return "key_mismatch";
    case ErrorCode::kTextMismatch: return "text_mismatch";
    case ErrorCode::kEmptyComponent: return "empty_component";
    case ErrorCode::kMissingRole: return "missing_role";
    case ErrorCode::kDuplicateRole: return "duplicate_role";
    case ErrorCode::kEmptyTokenSet: return "empty_token_set";
    case ErrorCode::kNoValidQueries: return "no_valid_queries";
    case ErrorCode::kEmptyInput: return "empty_input";
    case ErrorCode::kMissingComponent: return "missing_component";
    case ErrorCode::kUndefinedSimilarity: return "undefined_similarity";
    case ErrorCode::kZeroNorm: return "zero_norm";
    case ErrorCode::kEmptyProfile: return "empty_profile";
    case ErrorCode::kEmptyGeneration: return "empty_generation";
    case ErrorCode::kMissingTraces: return "missing_traces";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// A non-fatal observation attached to a result. Validation routines return
// these instead of throwing.
struct Finding {
  ErrorCode code;
  std::string location;
  std::string message;

  bool operator==(const Finding&) const = default;
};

using Findings = std::vector<Finding>;

inline bool has_finding(const Findings& findings, ErrorCode code) {
  for (const auto& f : findings) {
    if (f.code == code) return true;
  }
  return false;
}

}  // namespace causelens
