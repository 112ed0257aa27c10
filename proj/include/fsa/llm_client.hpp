#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "fsa/statements.hpp"

namespace fsa {

enum class PromptKind { Simple, Cot, GuessIdentity };
std::string to_string(PromptKind k);

enum class Direction { Increase, Decrease };
enum class Magnitude { Large, Moderate, Small };
std::string to_string(Direction d);
std::string to_string(Magnitude m);
Direction parse_direction(const std::string& s);
Magnitude parse_magnitude(const std::string& s);

struct PromptSpec {
    PromptKind kind = PromptKind::Cot;
    std::string statements_text;
    std::string model_name;
    double temperature = 0.0;
    double top_p = 1.0;
    bool logprobs_enabled = true;
    std::string tag;  // opaque request label (e.g. firm:year:kind); mocks key on it
};

struct Prompt {
    std::string system;
    std::string user;
    std::string text() const { return system + "\n\n" + user; }
};

/// Builds the frozen prompt wording for the given kind. Refuses (throws) when
/// the statements text fails the anonymity check against `lexicon`.
Prompt build_prompt(const PromptSpec& spec, const AnonymityLexicon& lexicon);

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant"
    std::string content;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    double top_p = 1.0;
    bool logprobs = true;
    std::string tag;        // opaque label (firm:year:kind); never sent over the wire
    std::string cache_key;  // response-cache key; mocks can script against it
};

struct TokenLogprob {
    std::string token;
    double logprob = 0.0;
};

struct ChatResponse {
    std::string content;                     // assistant message text
    std::vector<TokenLogprob> token_logprobs;
    std::string raw;                         // verbatim provider payload (JSON)
};

class TransportError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::string raw_payload)
        : Error(what), raw(std::move(raw_payload)) {}
    std::string raw;
};

/// Any chat-completion endpoint. Implementations throw TransportError on
/// connectivity/server failures and return the raw payload otherwise.
class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual std::string name() const = 0;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
};

/// Extracts content + token logprobs from a chat-completion payload.
ChatResponse parse_chat_payload(const std::string& payload_json);

/// Scripted provider for tests and offline runs. Canned entries are keyed by
/// request tag or by cache key; an entry can be a full payload or just the
/// structured content object (then wrapped into a payload). With fallback
/// enabled, unknown requests get a deterministic response derived from the
/// request digest.
class MockChatProvider : public ChatProvider {
public:
    MockChatProvider() = default;
    explicit MockChatProvider(const std::string& scripted_responses_path);

    std::string name() const override { return "mock"; }
    ChatResponse complete(const ChatRequest& request) override;

    void add_response(const std::string& key, const std::string& payload_or_content_json);
    void set_fallback(bool enabled) { fallback_ = enabled; }
    /// Next `n` calls raise TransportError (retry-path testing).
    void fail_next(int n) { fail_next_ = n; }

    int calls() const { return calls_; }

private:
    std::map<std::string, std::string> responses_;
    bool fallback_ = true;
    int fail_next_ = 0;
    int calls_ = 0;
    std::mutex mu_;
};

/// OpenAI-compatible chat endpoint over HTTPS. Credentials come from the
/// environment variable named in the config.
class HttpChatProvider : public ChatProvider {
public:
    struct Options {
        std::string provider_name;
        std::string base_url;            // e.g. https://api.openai.com
        std::string path = "/v1/chat/completions";
        std::string api_key_env;         // env var holding the bearer token
        int timeout_seconds = 120;
        int max_requests_per_minute = 0;  // 0 = no pacing
    };
    explicit HttpChatProvider(Options options);

    std::string name() const override { return options_.provider_name; }
    ChatResponse complete(const ChatRequest& request) override;

private:
    void pace();

    Options options_;
    std::mutex pace_mu_;
    std::chrono::steady_clock::time_point next_slot_{};
};

/// Parsed chain-of-thought response. Simple-prompt responses carry only the
/// direction; all fields are required for kind=cot.
struct CotResponse {
    Direction direction = Direction::Decrease;
    std::optional<Magnitude> magnitude;
    std::optional<double> confidence;  // [0,1]
    std::string trend_analysis;
    std::string ratio_analysis;
    std::string rationale;
    std::vector<double> token_logprobs;  // each <= 0
    std::string raw;
};

struct GuessResponse {
    std::vector<std::string> firm_name_guesses;  // exactly 10
    int year_guess = 0;                          // 4-digit
    std::string raw;
};

/// Parses the structured JSON content of a chat response (code fences
/// tolerated). Validation depends on the prompt kind; throws ParseError.
CotResponse parse_cot_response(const ChatResponse& response, PromptKind kind);
GuessResponse parse_guess_response(const ChatResponse& response);

std::string cot_response_to_json(const CotResponse& r);
CotResponse cot_response_from_json(const std::string& json_text);

/// Arithmetic mean of the output-token log-probabilities. Throws Error when
/// the token list is empty (direction remains usable).
double aggregate_logprob(const CotResponse& response);

/// Variant averaging only the tokens overlapping the direction value in the
/// structured output; falls back to all tokens when spans cannot be aligned.
double aggregate_logprob_answer_tokens(const CotResponse& response);

/// Append-only directory of per-key JSON files.
class ResponseCache {
public:
    ResponseCache() = default;  // disabled
    explicit ResponseCache(std::string directory);

    bool enabled() const { return !dir_.empty(); }
    static std::string cache_key(const PromptSpec& spec, const Prompt& prompt);

    std::optional<std::string> lookup_raw(const std::string& key) const;
    void store(const std::string& key, const PromptSpec& spec, const std::string& raw_payload,
               const std::string& parsed_json);

private:
    std::string dir_;
    std::shared_ptr<std::mutex> write_mu_ = std::make_shared<std::mutex>();
};

struct RetryPolicy {
    int max_transport_retries = 3;
    int backoff_base_ms = 100;  // doubled per retry; 0 disables sleeping
    bool repair_retry = true;   // one reformat attempt on schema-invalid payloads
};

struct PredictOutcome {
    std::optional<CotResponse> response;
    std::string error;  // non-empty on failure; raw payload retained inside
    bool from_cache = false;
};

struct GuessOutcome {
    std::optional<GuessResponse> response;
    std::string error;
    bool from_cache = false;
};

/// Drives a provider with the frozen prompts, caching every response.
class LlmClient {
public:
    LlmClient(ChatProvider& provider, ResponseCache cache, AnonymityLexicon lexicon,
              RetryPolicy retry = {});

    PredictOutcome predict(const PromptSpec& spec);
    GuessOutcome guess_identity(const PromptSpec& spec);

    int provider_calls() const { return provider_calls_; }
    int parse_failures() const { return parse_failures_; }

private:
    ChatResponse fetch(const PromptSpec& spec, const Prompt& prompt, const std::string& key,
                       bool* from_cache);
    ChatResponse complete_with_retries(const ChatRequest& request);

    ChatProvider& provider_;
    ResponseCache cache_;
    AnonymityLexicon lexicon_;
    RetryPolicy retry_;
    int provider_calls_ = 0;
    int parse_failures_ = 0;
    std::mutex mu_;
};

/// Case/punctuation-insensitive firm-name identity used by the memory probe.
bool names_match(const std::string& a, const std::string& b);

/// 0-based rank of the true name within the guesses, if present.
std::optional<size_t> guess_rank(const GuessResponse& guess, const std::string& true_name);

/// Runs `fn(i)` for i in [0, n) with at most `parallelism` concurrent calls.
void parallel_for(size_t n, int parallelism, const std::function<void(size_t)>& fn);

}  // namespace fsa
