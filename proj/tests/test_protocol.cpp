#include <gtest/gtest.h>

#include <thread>

#include "oracles.hpp"
#include "t1/protocol.hpp"
#include "t1/remote_backend.hpp"

namespace t1 {
namespace {

using testing::fixture;

TEST(QueryPrompt, Stage1MatchesReferenceSample) {
  EXPECT_EQ(assemble_query_prompt("where is whitemarsh island", QueryPromptTemplate::stage1()),
            fixture("query_stage1_whitemarsh.txt"));
}

TEST(QueryPrompt, Stage2InstructionBlockMatchesGolden) {
  const auto tpl = QueryPromptTemplate::stage2();
  EXPECT_EQ(tpl.system_text, fixture("query_instruction_stage2.txt"));
  EXPECT_TRUE(tpl.system_text.ends_with("end every response with <emb_token>."));
  for (const char* step : {"\n1.Identify", "\n2.Incorporate", "\n3.Infer"}) {
    EXPECT_NE(tpl.system_text.find(step), std::string::npos) << step;
  }
  const auto prompt = assemble_query_prompt("why do leaves change colour", tpl);
  EXPECT_TRUE(prompt.starts_with("<|im_start|>system\n" + fixture("query_instruction_stage2.txt") + "<|im_end|>\n"));
  EXPECT_TRUE(prompt.ends_with("<|im_start|>user\nwhy do leaves change colour<|im_end|>\n<|im_start|>assistant\n"));
}

TEST(QueryPrompt, TrajectoryPromptMatchesGolden) {
  EXPECT_EQ(std::string(prompts::kTrajectoryPrompt), fixture("trajectory_prompt.txt"));
  EXPECT_EQ(assemble_trajectory_prompt("q"), fixture("trajectory_prompt.txt") + "q");
}

TEST(QueryPrompt, IsPure) {
  for (auto tpl : {QueryPromptTemplate::stage1(), QueryPromptTemplate::stage2()}) {
    EXPECT_EQ(assemble_query_prompt("same query", tpl), assemble_query_prompt("same query", tpl));
  }
}

TEST(QueryPrompt, EmptyQueryRejected) {
  try {
    assemble_query_prompt("", QueryPromptTemplate::stage1());
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kInvalidInput);
  }
}

TEST(DocPrompt, MatchesGolden) {
  const std::string doc = "photosynthesis converts light energy into chemical energy stored in glucose.";
  EXPECT_EQ(assemble_doc_prompt(doc, {}), fixture("doc_prompt_photosynthesis.txt"));
  EXPECT_EQ(DocPromptTemplate{}.instruction_text, fixture("doc_instruction.txt"));
}

TEST(DocPrompt, TokenLastInstructionFirst) {
  for (const char* doc : {"a", "text with <emb_token> inside", "multi\nline"}) {
    const auto p = assemble_doc_prompt(doc, {});
    EXPECT_TRUE(p.ends_with("<emb_token>"));
    EXPECT_TRUE(p.starts_with(DocPromptTemplate{}.instruction_text));
    EXPECT_LT(p.find(DocPromptTemplate{}.instruction_text), p.find(doc));
  }
  EXPECT_EQ(count_occurrences(assemble_doc_prompt("plain", {}), kEmbToken), 1u);
}

TEST(DocPrompt, EmptyDocRejected) { EXPECT_THROW(assemble_doc_prompt("", {}), Error); }

TEST(FormatValidator, CanonicalCases) {
  EXPECT_TRUE(validate_output_format("core concepts, related terms <emb_token>", Stage::kStage2).valid);

  const auto trailing = validate_output_format("analysis <emb_token> trailing text", Stage::kStage2);
  EXPECT_FALSE(trailing.valid);
  EXPECT_EQ(trailing.reason, FormatFailure::kTokenNotTerminal);

  const auto bare = validate_output_format("<emb_token>", Stage::kStage2);
  EXPECT_FALSE(bare.valid);
  EXPECT_EQ(bare.reason, FormatFailure::kEmptyReasoning);
}

TEST(FormatValidator, OtherFailures) {
  EXPECT_EQ(validate_output_format("no token here", Stage::kStage3).reason, FormatFailure::kMissingToken);
  EXPECT_EQ(validate_output_format("a <emb_token> b <emb_token>", Stage::kStage3).reason,
            FormatFailure::kMultipleTokens);
  EXPECT_EQ(validate_output_format("  \n <emb_token>", Stage::kStage3).reason, FormatFailure::kEmptyReasoning);
  EXPECT_TRUE(validate_output_format("reasoning <emb_token><|im_end|>", Stage::kStage3).valid);
}

TEST(FormatValidator, Stage1RequiresFixedSuffix) {
  EXPECT_TRUE(validate_output_format("The embedding is <emb_token>", Stage::kStage1).valid);
  EXPECT_TRUE(validate_output_format("The embedding is <emb_token><|im_end|>", Stage::kStage1).valid);
  EXPECT_EQ(validate_output_format("Some reasoning <emb_token>", Stage::kStage1).reason, FormatFailure::kSuffixMismatch);
}

TEST(MockBackend, DeterministicUnitNorm) {
  MockBackend backend(7, 64);
  const auto a = encode_query(backend, "where is whitemarsh island", QueryPromptTemplate::stage2());
  const auto b = encode_query(backend, "where is whitemarsh island", QueryPromptTemplate::stage2());
  ASSERT_TRUE(a.token_found);
  ASSERT_TRUE(a.embedding.has_value());
  EXPECT_EQ(*a.embedding, *b.embedding);
  EXPECT_EQ(a.embedding->dim(), 64u);
  EXPECT_NEAR(a.embedding->norm(), 1.0, 1e-12);
  EXPECT_TRUE(a.embedding->normalized());
  EXPECT_FALSE(a.reasoning_text.empty());
  EXPECT_EQ(a.generated_len, count_words(a.reasoning_text));
}

TEST(MockBackend, DistinctQueriesDistinctEmbeddings) {
  MockBackend backend(7, 64);
  const auto tpl = QueryPromptTemplate::stage2();
  const auto a = encode_query(backend, "query one", tpl);
  const auto b = encode_query(backend, "query two", tpl);
  EXPECT_LT(dot(a.embedding->values(), b.embedding->values()), 0.999);
  // The seed changes the hash.
  const auto c = encode_query(MockBackend(8, 64), "query one", tpl);
  EXPECT_NE(*a.embedding, *c.embedding);
}

TEST(MockBackend, ReasoningBoundedByMaxTokens) {
  MockBackend backend;
  const auto full = encode_query(backend, "a long enough question", QueryPromptTemplate::stage2(), 512);
  ASSERT_TRUE(full.token_found);
  const auto cut = encode_query(backend, "a long enough question", QueryPromptTemplate::stage2(), 5);
  EXPECT_LE(cut.generated_len, 5u);
  EXPECT_FALSE(cut.token_found);
  EXPECT_FALSE(cut.embedding.has_value());
}

TEST(MockBackend, Stage1EmitsFixedSuffix) {
  MockBackend backend;
  const auto r = encode_query(backend, "where is whitemarsh island", QueryPromptTemplate::stage1());
  EXPECT_TRUE(validate_output_format(r.reasoning_text + " <emb_token>", Stage::kStage1).valid);
}

TEST(EncodeDoc, SingleEncodingPass) {
  MockBackend backend(3, 32);
  const auto a = encode_doc(backend, "photosynthesis converts light");
  const auto b = encode_doc(backend, "photosynthesis converts light");
  EXPECT_TRUE(a.reasoning_text.empty());
  EXPECT_EQ(a.generated_len, 0u);
  ASSERT_TRUE(a.token_found);
  EXPECT_EQ(*a.embedding, *b.embedding);
  EXPECT_THROW(encode_doc(backend, ""), Error);
}

class SilentBackend final : public Backend {
 public:
  BackendReply complete(const BackendRequest&) const override { return {"thinking without end", {0.5, 0.5}, false}; }
};

TEST(Encode, MissingTokenMeansNoEmbedding) {
  const auto r = encode_query(SilentBackend{}, "q", QueryPromptTemplate::stage2());
  EXPECT_FALSE(r.token_found);
  EXPECT_FALSE(r.embedding.has_value());
}

class ChattyBackend final : public Backend {
 public:
  BackendReply complete(const BackendRequest&) const override { return {"one two three four", {1.0}, true}; }
};

TEST(Encode, BackendExceedingLimitIsTransportError) {
  try {
    encode_query(ChattyBackend{}, "q", QueryPromptTemplate::stage2(), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kTransport);
  }
}

TEST(WireFormat, RequestAndReplyJson) {
  const BackendRequest req{"prompt text", EncodeMode::kEmbedOnly, 17};
  const auto j = to_json(req);
  EXPECT_EQ(j.dump(), R"({"max_tokens":17,"mode":"embed_only","prompt":"prompt text"})");
  const auto back = request_from_json(j);
  EXPECT_EQ(back.prompt, req.prompt);
  EXPECT_EQ(back.mode, req.mode);
  EXPECT_EQ(back.max_tokens, req.max_tokens);

  const auto rep = reply_from_json(nlohmann::json::parse(R"({"reasoning":"r","embedding":[0.6,0.8],"token_found":true})"));
  EXPECT_EQ(rep.reasoning, "r");
  EXPECT_EQ(rep.embedding, (std::vector<double>{0.6, 0.8}));
  EXPECT_TRUE(rep.token_found);
  EXPECT_THROW(request_from_json(nlohmann::json::parse(R"({"prompt":"p","mode":"bogus","max_tokens":1})")), Error);
}

// Serves the mock backend over HTTP to exercise the remote client end to end.
TEST(RemoteBackend, RoundTripsThroughHttp) {
  httplib::Server server;
  MockBackend mock(11, 16);
  std::vector<std::string> modes;
  server.Post("/encode", [&](const httplib::Request& req, httplib::Response& res) {
    const auto request = request_from_json(nlohmann::json::parse(req.body));
    modes.emplace_back(encode_mode_name(request.mode));
    res.set_content(to_json(mock.complete(request)).dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  if (port <= 0) GTEST_SKIP() << "cannot bind a local port";
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  RemoteBackend remote("http://127.0.0.1:" + std::to_string(port) + "/encode");
  const auto tpl = QueryPromptTemplate::stage2();
  const auto via_http = encode_query(remote, "remote query", tpl);
  const auto local = encode_query(mock, "remote query", tpl);
  const auto doc = encode_doc(remote, "remote doc");
  server.stop();
  worker.join();

  ASSERT_TRUE(via_http.embedding.has_value());
  EXPECT_EQ(via_http.reasoning_text, local.reasoning_text);
  EXPECT_EQ(*via_http.embedding, *local.embedding);
  EXPECT_TRUE(doc.token_found);
  EXPECT_EQ(modes, (std::vector<std::string>{"generate_embed", "embed_only"}));
}

TEST(RemoteBackend, UnreachableEndpointIsTransportError) {
  RemoteBackend remote("http://127.0.0.1:1/encode", 1);
  try {
    encode_doc(remote, "x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kTransport);
  }
}

TEST(BackendDescriptor, Factory) {
  BackendDescriptor d;
  EXPECT_EQ(d.max_reasoning_tokens, 512);
  EXPECT_NE(dynamic_cast<MockBackend*>(make_backend(d).get()), nullptr);
  d.kind = BackendKind::kRemoteService;
  EXPECT_THROW(make_backend(d), Error);
  d.endpoint = "http://localhost:9/x";
  EXPECT_NE(dynamic_cast<RemoteBackend*>(make_backend(d).get()), nullptr);
}

}  // namespace
}  // namespace t1
