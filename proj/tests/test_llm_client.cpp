#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fsa/llm_client.hpp"
#include "fsa/rng.hpp"
#include "oracles.hpp"

using namespace fsa;
namespace fs = std::filesystem;

namespace {

const std::string kExample =
    std::string(FSA_SOURCE_DIR) + "/data/fixtures/example_cot_response.json";

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string content_payload(const std::string& content_json,
                            const std::vector<double>& lps = {-0.1, -0.2}) {
    std::string lp_items;
    for (size_t i = 0; i < lps.size(); ++i) {
        if (i) lp_items += ",";
        lp_items += "{\"token\":\"x\",\"logprob\":" + std::to_string(lps[i]) + "}";
    }
    std::string escaped;
    for (char c : content_json) {
        if (c == '"') escaped += "\\\"";
        else if (c == '\\') escaped += "\\\\";
        else if (c == '\n') escaped += "\\n";
        else escaped += c;
    }
    return "{\"choices\":[{\"message\":{\"role\":\"assistant\",\"content\":\"" + escaped +
           "\"},\"logprobs\":{\"content\":[" + lp_items + "]}}]}";
}

const char* kValidCot =
    R"({"trend analysis":"t","ratio analysis":"r","direction":"increase","magnitude":"moderate","confidence":0.7,"reason":"x"})";

PromptSpec cot_spec() {
    PromptSpec spec;
    spec.kind = PromptKind::Cot;
    spec.statements_text = "Total Asset  10.0  9.0";
    spec.model_name = "m1";
    spec.tag = "A:2001:cot";
    return spec;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("fsa_test_" + std::to_string(Rng(std::random_device{}()).next_u64()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("prompt construction per kind") {
    const AnonymityLexicon lexicon({"Tesla"});
    PromptSpec spec = cot_spec();

    const Prompt cot = build_prompt(spec, lexicon);
    CHECK(cot.user.find("\"large\"") != std::string::npos);
    CHECK(cot.user.find("\"moderate\"") != std::string::npos);
    CHECK(cot.user.find("\"small\"") != std::string::npos);
    CHECK(cot.user.find("formula first") != std::string::npos);
    CHECK(cot.user.find("ratio") != std::string::npos);
    CHECK(cot.user.find(spec.statements_text) != std::string::npos);

    spec.kind = PromptKind::Simple;
    const Prompt simple = build_prompt(spec, lexicon);
    CHECK(simple.user.find("ratio") == std::string::npos);
    CHECK(simple.user.find("trend") == std::string::npos);
    CHECK(simple.user.find("increase") != std::string::npos);

    spec.kind = PromptKind::GuessIdentity;
    const Prompt guess = build_prompt(spec, lexicon);
    CHECK(guess.user.find("ten") != std::string::npos);
    CHECK(guess.user.find("never refuse") != std::string::npos);

    // anonymity failure refuses to build
    spec.statements_text = "Tesla  10.0  9.0";
    CHECK_THROWS_AS(build_prompt(spec, lexicon), Error);
    spec.statements_text = "assets in 2021";
    CHECK_THROWS_AS(build_prompt(spec, lexicon), Error);
}

TEST_CASE("example payload parses to (increase, moderate, 0.7)") {
    const ChatResponse chat = parse_chat_payload(read_file(kExample));
    const CotResponse r = parse_cot_response(chat, PromptKind::Cot);
    CHECK(r.direction == Direction::Increase);
    CHECK(r.magnitude == Magnitude::Moderate);
    CHECK(r.confidence == doctest::Approx(0.7));
    CHECK_FALSE(r.trend_analysis.empty());
    CHECK_FALSE(r.ratio_analysis.empty());
    CHECK_FALSE(r.rationale.empty());
    CHECK(r.token_logprobs.size() == 8);
    for (double lp : r.token_logprobs) CHECK(lp <= 0.0);
}

TEST_CASE("parse validation rejects schema violations") {
    auto parse = [](const std::string& content) {
        return parse_cot_response(parse_chat_payload(content_payload(content)), PromptKind::Cot);
    };
    // missing ratio analysis
    CHECK_THROWS_AS(
        parse(
            R"({"trend analysis":"t","direction":"increase","magnitude":"large","confidence":0.5,"reason":"x"})"),
        ParseError);
    // unknown direction never escapes
    CHECK_THROWS_AS(
        parse(
            R"({"trend analysis":"t","ratio analysis":"r","direction":"sideways","magnitude":"large","confidence":0.5,"reason":"x"})"),
        ParseError);
    // unknown magnitude never escapes
    CHECK_THROWS_AS(
        parse(
            R"({"trend analysis":"t","ratio analysis":"r","direction":"increase","magnitude":"huge","confidence":0.5,"reason":"x"})"),
        ParseError);
    // confidence outside [0,1]
    CHECK_THROWS_AS(
        parse(
            R"({"trend analysis":"t","ratio analysis":"r","direction":"increase","magnitude":"large","confidence":1.5,"reason":"x"})"),
        ParseError);
    // positive logprob rejected
    CHECK_THROWS_AS(parse_cot_response(
                        parse_chat_payload(content_payload(kValidCot, {0.2, -0.1})),
                        PromptKind::Cot),
                    ParseError);
    // simple kind only needs the direction
    const CotResponse simple = parse_cot_response(
        parse_chat_payload(content_payload(R"({"direction":"decrease"})")), PromptKind::Simple);
    CHECK(simple.direction == Direction::Decrease);
    CHECK_FALSE(simple.magnitude.has_value());
}

TEST_CASE("code fences around the JSON object are tolerated") {
    const std::string fenced = std::string("```json\n") + kValidCot + "\n```";
    const CotResponse r = parse_cot_response(parse_chat_payload(content_payload(fenced)),
                                             PromptKind::Cot);
    CHECK(r.direction == Direction::Increase);
}

TEST_CASE("aggregate_logprob: mean, bounds, oracle, order invariance") {
    CotResponse r;
    r.token_logprobs = {-0.1, -0.3};
    CHECK(aggregate_logprob(r) == doctest::Approx(-0.2));
    r.token_logprobs = {0.0, 0.0, 0.0};
    CHECK(aggregate_logprob(r) == 0.0);
    r.token_logprobs.clear();
    CHECK_THROWS_AS(aggregate_logprob(r), Error);

    Rng rng(3);
    std::vector<double> lps(1000);
    for (auto& lp : lps) lp = -rng.uniform() * 5.0;
    r.token_logprobs = lps;
    CHECK(aggregate_logprob(r) == doctest::Approx(oracle::streaming_mean(lps)).epsilon(1e-12));

    rng.shuffle(r.token_logprobs);
    CHECK(aggregate_logprob(r) == doctest::Approx(oracle::streaming_mean(lps)).epsilon(1e-12));
}

TEST_CASE("answer-token variant averages only the direction span") {
    // tokens: prefix (lp -1.0), the direction value (lp -0.1), suffix (lp -1.0)
    const std::string content = R"({"direction": "increase"})";
    std::string payload =
        R"({"choices":[{"message":{"role":"assistant","content":"{\"direction\": \"increase\"}"},)"
        R"("logprobs":{"content":[)"
        R"({"token":"{\"direction\": \"","logprob":-1.0},)"
        R"({"token":"increase","logprob":-0.1},)"
        R"({"token":"\"}","logprob":-1.0}]}}]})";
    const CotResponse r =
        parse_cot_response(parse_chat_payload(payload), PromptKind::Simple);
    CHECK(aggregate_logprob(r) == doctest::Approx((-1.0 - 0.1 - 1.0) / 3.0));
    CHECK(aggregate_logprob_answer_tokens(r) == doctest::Approx(-0.1));
}

TEST_CASE("cached responses round-trip and suppress provider calls") {
    TempDir tmp;
    MockChatProvider mock;
    mock.set_fallback(false);
    mock.add_response("A:2001:cot", content_payload(kValidCot));
    RetryPolicy retry;
    retry.backoff_base_ms = 0;
    LlmClient client(mock, ResponseCache(tmp.path.string()), AnonymityLexicon{}, retry);

    const PromptSpec spec = cot_spec();
    const PredictOutcome first = client.predict(spec);
    REQUIRE(first.response.has_value());
    CHECK_FALSE(first.from_cache);
    CHECK(mock.calls() == 1);
    CHECK(client.provider_calls() == 1);

    const PredictOutcome second = client.predict(spec);
    REQUIRE(second.response.has_value());
    CHECK(second.from_cache);
    CHECK(mock.calls() == 1);  // served from cache
    CHECK(client.provider_calls() == 1);

    // all fields identical after the disk round trip
    CHECK(second.response->direction == first.response->direction);
    CHECK(second.response->magnitude == first.response->magnitude);
    CHECK(second.response->confidence == first.response->confidence);
    CHECK(second.response->trend_analysis == first.response->trend_analysis);
    CHECK(second.response->ratio_analysis == first.response->ratio_analysis);
    CHECK(second.response->rationale == first.response->rationale);
    CHECK(second.response->token_logprobs == first.response->token_logprobs);

    // parsed-field serialization is its own inverse
    const std::string json_text = cot_response_to_json(*first.response);
    const CotResponse back = cot_response_from_json(json_text);
    CHECK(cot_response_to_json(back) == json_text);
}

TEST_CASE("transport retries recover, then give up") {
    MockChatProvider mock;
    mock.set_fallback(false);
    mock.add_response("A:2001:cot", content_payload(kValidCot));
    RetryPolicy retry;
    retry.backoff_base_ms = 0;
    retry.max_transport_retries = 3;

    SUBCASE("two failures then success") {
        mock.fail_next(2);
        LlmClient client(mock, ResponseCache{}, AnonymityLexicon{}, retry);
        const auto out = client.predict(cot_spec());
        CHECK(out.response.has_value());
        CHECK(mock.calls() == 3);
    }
    SUBCASE("persistent failure surfaces an error") {
        mock.fail_next(10);
        LlmClient client(mock, ResponseCache{}, AnonymityLexicon{}, retry);
        const auto out = client.predict(cot_spec());
        CHECK_FALSE(out.response.has_value());
        CHECK_FALSE(out.error.empty());
        CHECK(mock.calls() == 4);  // initial try + 3 retries
    }
}

TEST_CASE("schema-invalid payload triggers one repair retry") {
    MockChatProvider mock;
    mock.set_fallback(false);
    // the original tag returns junk; the repair tag returns valid JSON
    mock.add_response("A:2001:cot", content_payload("not json at all"));
    mock.add_response("A:2001:cot:repair", content_payload(kValidCot));
    RetryPolicy retry;
    retry.backoff_base_ms = 0;
    LlmClient client(mock, ResponseCache{}, AnonymityLexicon{}, retry);
    const auto out = client.predict(cot_spec());
    REQUIRE(out.response.has_value());
    CHECK(mock.calls() == 2);
    CHECK(client.parse_failures() == 0);

    // without a usable repair, the parse error carries through
    MockChatProvider bad;
    bad.set_fallback(false);
    bad.add_response("A:2001:cot", content_payload(R"({"direction":"up"})"));
    bad.add_response("A:2001:cot:repair", content_payload(R"({"direction":"up"})"));
    LlmClient client2(bad, ResponseCache{}, AnonymityLexicon{}, retry);
    const auto fail = client2.predict(cot_spec());
    CHECK_FALSE(fail.response.has_value());
    CHECK(fail.error.find("parse error") != std::string::npos);
    CHECK(client2.parse_failures() == 1);
}

TEST_CASE("guess responses: schema, rank semantics, name matching") {
    const std::string guess_content =
        R"({"firm_names":["Tesla","Amazon","Apple","Microsoft","Facebook","Alphabet","Acme Corp.","Netflix","Nvidia","Walmart"],"fiscal_year":2020})";
    const GuessResponse g =
        parse_guess_response(parse_chat_payload(content_payload(guess_content)));
    REQUIRE(g.firm_name_guesses.size() == 10);
    CHECK(g.year_guess == 2020);

    CHECK(guess_rank(g, "tesla") == 0);
    CHECK(guess_rank(g, "ACME CORP") == 6);  // top-10 hit, not top-1
    CHECK_FALSE(guess_rank(g, "Enron").has_value());
    CHECK(names_match("Exxon-Mobil", "exxon mobil"));
    CHECK_FALSE(names_match("Tesla", "Tesla Energy"));

    // nine names is a schema violation
    const std::string nine =
        R"({"firm_names":["a","b","c","d","e","f","g","h","i"],"fiscal_year":2020})";
    CHECK_THROWS_AS(parse_guess_response(parse_chat_payload(content_payload(nine))), ParseError);
    const std::string bad_year =
        R"({"firm_names":["a","b","c","d","e","f","g","h","i","j"],"fiscal_year":20})";
    CHECK_THROWS_AS(parse_guess_response(parse_chat_payload(content_payload(bad_year))),
                    ParseError);

    MockChatProvider mock;
    mock.set_fallback(false);
    mock.add_response("A:2001:guess_identity", content_payload(guess_content));
    RetryPolicy retry;
    retry.backoff_base_ms = 0;
    LlmClient client(mock, ResponseCache{}, AnonymityLexicon{}, retry);
    PromptSpec spec = cot_spec();
    spec.tag = "A:2001:guess_identity";
    const auto out = client.guess_identity(spec);
    REQUIRE(out.response.has_value());
    CHECK(out.response->year_guess == 2020);
}

TEST_CASE("scripted mock file and deterministic fallback") {
    TempDir tmp;
    const fs::path script = tmp.path / "responses.json";
    {
        std::ofstream out(script);
        out << R"({"fallback": true, "responses": {"X:1:cot": )" << content_payload(kValidCot)
            << "}}";
    }
    MockChatProvider mock(script.string());
    ChatRequest req;
    req.model = "m";
    req.messages = {{"user", "hello"}};
    req.tag = "X:1:cot";
    CHECK(parse_chat_payload(mock.complete(req).raw).content.find("increase") !=
          std::string::npos);

    // unknown tag falls back deterministically
    req.tag = "unknown";
    const ChatResponse a = mock.complete(req);
    const ChatResponse b = mock.complete(req);
    CHECK(a.raw == b.raw);
    const CotResponse parsed = parse_cot_response(a, PromptKind::Cot);
    CHECK((parsed.direction == Direction::Increase || parsed.direction == Direction::Decrease));
}

TEST_CASE("canned responses can be keyed by the cache key itself") {
    const PromptSpec spec = cot_spec();
    const Prompt prompt = build_prompt(spec, AnonymityLexicon{});
    const std::string key = ResponseCache::cache_key(spec, prompt);

    MockChatProvider mock;
    mock.set_fallback(false);
    mock.add_response(key, content_payload(kValidCot));
    RetryPolicy retry;
    retry.backoff_base_ms = 0;
    LlmClient client(mock, ResponseCache{}, AnonymityLexicon{}, retry);
    PromptSpec no_tag = spec;
    no_tag.tag.clear();  // only the cache key can match
    const auto out = client.predict(no_tag);
    REQUIRE(out.response.has_value());
    CHECK(out.response->direction == Direction::Increase);
}

TEST_CASE("parallel_for respects the bound and covers every index") {
    std::vector<int> hits(100, 0);
    parallel_for(hits.size(), 4, [&](size_t i) { hits[i] += 1; });
    for (int h : hits) CHECK(h == 1);
}
