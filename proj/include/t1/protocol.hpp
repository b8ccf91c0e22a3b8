#pragma once

/**
 * Query/document prompt assembly and the encoding backend contract.
 *
 * Queries are encoded asymmetrically: the backend first generates a bounded
 * reasoning sequence after the chat-formatted query prompt, then the hidden
 * state at the terminal <emb_token> is read out as the embedding. Documents
 * skip generation entirely; the document instruction, the text and the token
 * are fed through a single encoding pass.
 */

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "t1/embedding.hpp"
#include "t1/error.hpp"
#include "t1/rng.hpp"

namespace t1 {

inline constexpr std::string_view kEmbToken = "<emb_token>";
inline constexpr std::string_view kImStart = "<|im_start|>";
inline constexpr std::string_view kImEnd = "<|im_end|>";

enum class Stage { kStage1, kStage2, kStage3 };

inline std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::kStage1: return "stage1";
    case Stage::kStage2: return "stage2";
    case Stage::kStage3: return "stage3";
  }
  return "stage?";
}

inline Stage parse_stage(std::string_view name) {
  if (name == "stage1" || name == "1") return Stage::kStage1;
  if (name == "stage2" || name == "2") return Stage::kStage2;
  if (name == "stage3" || name == "3") return Stage::kStage3;
  fail(Errc::kInvalidInput, "unknown stage '" + std::string(name) + "'");
}

namespace prompts {

inline constexpr std::string_view kStage1System =
    "You are an intelligent retrieval expert. Your goal is to generate the optimal vector "
    "representation for the user's query.";

// The "\n" between the instruction and "query:" is the two literal characters
// backslash and 'n', exactly as the reference chat sample renders them.
inline constexpr std::string_view kStage1InstructPrefix =
    "Instruct: Given a query, retrieve relevant passages that answer the query.\\nquery: ";

inline constexpr std::string_view kStage1Suffix = "The embedding is <emb_token>";

inline constexpr std::string_view kQueryInstruction =
    R"(You are an intelligent retrieval expert. Your task is to enrich user input by increasing semantic depth in order to achieve more effective embedded representations. For each user input, please consider the following steps step by step:
1.Identify the core concepts and their interrelationships.
2.Incorporate key definitions and terms and expand necessary context-related synonyms.
3.Infer the key contents of the ideal target document.
After the analyzed content, you MUST end every response with <emb_token>.)";

inline constexpr std::string_view kDocInstruction =
    R"(You are an intelligent retrieval expert. Your task is to analyze the input text and generate a comprehensive semantic vector embedding.
You should capture core concepts, factual details, and underlying logic to ensure the representation is robust for both keyword matching and complex reasoning tasks.
The embedding must represent the text's meaning accurately for high-quality retrieval.)";

// Prompt used to regenerate short hypothetical-document reasoning trajectories
// with a teacher model. The query is appended after the final line.
inline constexpr std::string_view kTrajectoryPrompt = R"(
# Role
You are the world's most advanced search engine simulator. Your goal is to predict the **exact content**, **format**, and **style** of the ideal document that answers the user's query.

# Task
Based on the user's query, generate a **Hypothetical Document Passage** (approx. 100-200 words). Do not explain what the document *should* contain; instead, **write the document content directly**.

# Dynamic Style Guidelines (Crucial)
Analyze the query to determine the domain and adopt the matching style:

1.  **Coding & Technical Config** (e.g., Python, ROS, Pandas, Algorithms):
    * **Directly write code snippets**, CLI commands, directory trees, or log outputs.
    * Use specific library names, function names, and variable conventions (e.g., `self`, `df.interpolate`, `/catkin_ws`).
    * Do NOT provide beginner tutorials; provide the **solution code**.

2.  **Math, Logic & Physics** (e.g., Speed problems, Set theory):
    * **Solve the problem step-by-step**.
    * Use **LaTeX formatting** for formulas (e.g., $\mathcal{C}$, $\int$).
    * Show calculations, derivations, and proofs explicitly.

3.  **Academic, History & Science** (e.g., Oceanography, Banking Regulations, Sociology):
    * Write in a **dense, academic style**.
    * Hallucinate/Predict specific **dates, acts, legislation, citations, and technical terminology** (e.g., "DIDMCA", "halocline", "structural barriers").
    * Mimic the tone of a research paper abstract or a textbook excerpt.

4.  **General/Hobbyist** (e.g., Aquaponics):
    * Write in an informative blog post or forum answer style.
    * Focus on **mechanisms** and **practical functionality**.

# Constraints
* **NO** introductory filler (e.g., "Here is the code...", "The document discusses...").
* **NO** dictionary definitions unless explicitly asked.
* **Start directly** with the content.

# Input Query:
)";

}  // namespace prompts

struct QueryPromptTemplate {
  std::string system_text;
  std::string instruct_prefix;
  Stage stage = Stage::kStage2;
  // Reference assistant output (Stage 1) or required terminal marker (Stage 2/3).
  std::string expected_suffix;

  static QueryPromptTemplate stage1() {
    return {std::string(prompts::kStage1System), std::string(prompts::kStage1InstructPrefix),
            Stage::kStage1, std::string(prompts::kStage1Suffix)};
  }

  static QueryPromptTemplate stage2() {
    return {std::string(prompts::kQueryInstruction), "", Stage::kStage2, std::string(kEmbToken)};
  }

  static QueryPromptTemplate for_stage(Stage s) {
    return s == Stage::kStage1 ? stage1() : stage2();
  }
};

struct DocPromptTemplate {
  std::string instruction_text = std::string(prompts::kDocInstruction);
  std::string separator = "\n";
};

// Chat-formatted prompt up to and including the opened assistant turn; this is
// what a backend continues from.
inline std::string assemble_query_generation_prompt(std::string_view query,
                                                    const QueryPromptTemplate& tpl) {
  require(!query.empty(), Errc::kInvalidInput, "query text is empty");
  std::string out;
  out.reserve(tpl.system_text.size() + tpl.instruct_prefix.size() + query.size() + 96);
  out.append(kImStart).append("system\n").append(tpl.system_text).append(kImEnd).append("\n");
  out.append(kImStart).append("user\n").append(tpl.instruct_prefix).append(query).append(kImEnd);
  out.append("\n").append(kImStart).append("assistant\n");
  return out;
}

// Full query-side rendering. Stage 1 has a fixed reference answer, so the
// assistant turn is closed with it; later stages leave the turn open for the
// generated reasoning.
inline std::string assemble_query_prompt(std::string_view query, const QueryPromptTemplate& tpl) {
  std::string out = assemble_query_generation_prompt(query, tpl);
  if (tpl.stage == Stage::kStage1) out.append(tpl.expected_suffix).append(kImEnd);
  return out;
}

inline std::string assemble_doc_prompt(std::string_view doc, const DocPromptTemplate& tpl) {
  require(!doc.empty(), Errc::kInvalidInput, "document text is empty");
  std::string out;
  out.reserve(tpl.instruction_text.size() + tpl.separator.size() + doc.size() + kEmbToken.size());
  out.append(tpl.instruction_text).append(tpl.separator).append(doc).append(kEmbToken);
  return out;
}

inline std::string assemble_trajectory_prompt(std::string_view query) {
  require(!query.empty(), Errc::kInvalidInput, "query text is empty");
  return std::string(prompts::kTrajectoryPrompt).append(query);
}

// ---------------------------------------------------------------------------
// Output format validation

enum class FormatFailure {
  kNone,
  kMissingToken,
  kMultipleTokens,
  kTokenNotTerminal,
  kEmptyReasoning,
  kSuffixMismatch,
};

inline std::string_view format_failure_name(FormatFailure f) {
  switch (f) {
    case FormatFailure::kNone: return "ok";
    case FormatFailure::kMissingToken: return "missing-token";
    case FormatFailure::kMultipleTokens: return "multiple-tokens";
    case FormatFailure::kTokenNotTerminal: return "token-not-terminal";
    case FormatFailure::kEmptyReasoning: return "empty-reasoning";
    case FormatFailure::kSuffixMismatch: return "suffix-mismatch";
  }
  return "unknown";
}

struct FormatVerdict {
  bool valid = false;
  FormatFailure reason = FormatFailure::kNone;

  static FormatVerdict ok() { return {true, FormatFailure::kNone}; }
  static FormatVerdict rejected(FormatFailure why) { return {false, why}; }
};

inline std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

inline bool is_blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

// A single trailing <|im_end|> is the chat turn terminator, not content, and
// is ignored. Stage 1 must produce exactly the fixed suffix; Stage 2/3 require
// non-blank reasoning followed by exactly one terminal <emb_token>.
inline FormatVerdict validate_output_format(std::string_view generated, Stage stage) {
  if (generated.ends_with(kImEnd)) generated.remove_suffix(kImEnd.size());

  if (stage == Stage::kStage1) {
    return generated == prompts::kStage1Suffix ? FormatVerdict::ok()
                                               : FormatVerdict::rejected(FormatFailure::kSuffixMismatch);
  }

  const std::size_t n = count_occurrences(generated, kEmbToken);
  if (n == 0) return FormatVerdict::rejected(FormatFailure::kMissingToken);
  if (n > 1) return FormatVerdict::rejected(FormatFailure::kMultipleTokens);
  if (!generated.ends_with(kEmbToken)) return FormatVerdict::rejected(FormatFailure::kTokenNotTerminal);
  generated.remove_suffix(kEmbToken.size());
  if (is_blank(generated)) return FormatVerdict::rejected(FormatFailure::kEmptyReasoning);
  return FormatVerdict::ok();
}

// ---------------------------------------------------------------------------
// Backend contract

enum class EncodeMode { kGenerateEmbed, kEmbedOnly };

inline std::string_view encode_mode_name(EncodeMode m) {
  return m == EncodeMode::kGenerateEmbed ? "generate_embed" : "embed_only";
}

struct BackendRequest {
  std::string prompt;
  EncodeMode mode = EncodeMode::kGenerateEmbed;
  int max_tokens = 512;
};

struct BackendReply {
  std::string reasoning;
  std::vector<double> embedding;
  bool token_found = false;
};

inline nlohmann::json to_json(const BackendRequest& req) {
  return {{"prompt", req.prompt}, {"mode", encode_mode_name(req.mode)}, {"max_tokens", req.max_tokens}};
}

inline BackendRequest request_from_json(const nlohmann::json& j) {
  BackendRequest req;
  req.prompt = j.at("prompt").get<std::string>();
  const auto mode = j.at("mode").get<std::string>();
  if (mode == "generate_embed") {
    req.mode = EncodeMode::kGenerateEmbed;
  } else if (mode == "embed_only") {
    req.mode = EncodeMode::kEmbedOnly;
  } else {
    fail(Errc::kParse, "unknown encode mode '" + mode + "'");
  }
  req.max_tokens = j.at("max_tokens").get<int>();
  return req;
}

inline nlohmann::json to_json(const BackendReply& rep) {
  return {{"reasoning", rep.reasoning}, {"embedding", rep.embedding}, {"token_found", rep.token_found}};
}

inline BackendReply reply_from_json(const nlohmann::json& j) {
  BackendReply rep;
  rep.reasoning = j.at("reasoning").get<std::string>();
  rep.embedding = j.at("embedding").get<std::vector<double>>();
  rep.token_found = j.at("token_found").get<bool>();
  return rep;
}

// Implementations must be safe to call concurrently.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual BackendReply complete(const BackendRequest& request) const = 0;
};

enum class BackendKind { kDeterministicMock, kRemoteService };

struct BackendDescriptor {
  BackendKind kind = BackendKind::kDeterministicMock;
  int max_reasoning_tokens = 512;
  std::string endpoint;  // RemoteService only
  std::uint64_t seed = 0;  // DeterministicMock only
  std::size_t dim = 256;   // DeterministicMock only
};

inline std::size_t count_words(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

// Stand-in for a model: reasoning is a canned analysis built from the user
// turn, and the embedding is a seeded hash of everything up to the token,
// expanded to `dim` uniform components and L2-normalized. Token counts are
// whitespace words.
class MockBackend final : public Backend {
 public:
  explicit MockBackend(std::uint64_t seed = 0, std::size_t dim = 256) : seed_(seed), dim_(dim) {
    require(dim_ > 0, Errc::kInvalidInput, "mock backend dim must be positive");
  }

  BackendReply complete(const BackendRequest& request) const override {
    BackendReply reply;
    if (request.mode == EncodeMode::kEmbedOnly) {
      reply.token_found = std::string_view(request.prompt).ends_with(kEmbToken);
      if (reply.token_found) reply.embedding = hash_vector(request.prompt);
      return reply;
    }

    const std::string full = canned_reasoning(request.prompt);
    reply.reasoning = truncate_words(full, static_cast<std::size_t>(std::max(request.max_tokens, 0)));
    reply.token_found = reply.reasoning.size() == full.size();
    if (reply.token_found) {
      reply.embedding = hash_vector(request.prompt + reply.reasoning + " " + std::string(kEmbToken));
    }
    return reply;
  }

  std::size_t dim() const noexcept { return dim_; }

 private:
  static std::string user_turn(std::string_view prompt) {
    const std::string open = std::string(kImStart) + "user\n";
    auto begin = prompt.find(open);
    if (begin == std::string_view::npos) return std::string(prompt);
    begin += open.size();
    const auto end = prompt.find(kImEnd, begin);
    return std::string(prompt.substr(begin, end == std::string_view::npos ? end : end - begin));
  }

  static std::string canned_reasoning(std::string_view prompt) {
    if (prompt.find(prompts::kStage1System) != std::string_view::npos) return "The embedding is";
    std::string subject = user_turn(prompt);
    if (auto q = subject.rfind("query: "); q != std::string::npos) subject = subject.substr(q + 7);
    std::ostringstream os;
    os << "Core concepts: " << subject << ". Key terms and related context for " << subject
       << ". Ideal target document: a passage that directly addresses " << subject << ".";
    return os.str();
  }

  static std::string truncate_words(const std::string& text, std::size_t max_words) {
    std::size_t words = 0;
    bool in_word = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
      const bool space = text[i] == ' ' || text[i] == '\n';
      if (!space && !in_word && ++words > max_words) {
        auto cut = text.find_last_not_of(" \n", i == 0 ? 0 : i - 1);
        return cut == std::string::npos ? std::string() : text.substr(0, cut + 1);
      }
      in_word = !space;
    }
    return text;
  }

  std::vector<double> hash_vector(std::string_view bytes) const {
    Rng rng(hash_bytes(bytes, seed_));
    std::vector<double> v(dim_);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    const double n = l2_norm(v);
    for (double& x : v) x /= n;
    return v;
  }

  std::uint64_t seed_;
  std::size_t dim_;
};

// ---------------------------------------------------------------------------
// Encoding

struct EncodeResponse {
  std::string reasoning_text;
  std::optional<Embedding> embedding;
  bool token_found = false;
  std::size_t generated_len = 0;
};

namespace detail {

inline EncodeResponse to_response(BackendReply reply, std::size_t max_tokens) {
  EncodeResponse out;
  out.generated_len = count_words(reply.reasoning);
  require(out.generated_len <= max_tokens, Errc::kTransport,
          "backend returned " + std::to_string(out.generated_len) + " reasoning tokens, limit " +
              std::to_string(max_tokens));
  out.reasoning_text = std::move(reply.reasoning);
  out.token_found = reply.token_found;
  if (out.token_found) {
    require(!reply.embedding.empty(), Errc::kTransport, "backend reported token but sent no embedding");
    const bool unit = std::abs(l2_norm(reply.embedding) - 1.0) < kUnitNormTolerance;
    out.embedding = Embedding(std::move(reply.embedding), unit);
  }
  return out;
}

}  // namespace detail

inline EncodeResponse encode_query(const Backend& backend, std::string_view query,
                                   const QueryPromptTemplate& tpl, int max_reasoning_tokens = 512) {
  require(max_reasoning_tokens > 0, Errc::kInvalidInput, "max_reasoning_tokens must be positive");
  BackendRequest req{assemble_query_generation_prompt(query, tpl), EncodeMode::kGenerateEmbed,
                     max_reasoning_tokens};
  return detail::to_response(backend.complete(req), static_cast<std::size_t>(max_reasoning_tokens));
}

inline EncodeResponse encode_doc(const Backend& backend, std::string_view doc,
                                 const DocPromptTemplate& tpl = {}) {
  BackendRequest req{assemble_doc_prompt(doc, tpl), EncodeMode::kEmbedOnly, 0};
  auto reply = backend.complete(req);
  reply.reasoning.clear();
  return detail::to_response(std::move(reply), 0);
}

}  // namespace t1
