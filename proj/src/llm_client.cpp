#include "fsa/llm_client.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "fsa/digest.hpp"
#include "fsa/rng.hpp"

namespace fsa {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(PromptKind k) {
    switch (k) {
        case PromptKind::Simple: return "simple";
        case PromptKind::Cot: return "cot";
        case PromptKind::GuessIdentity: return "guess_identity";
    }
    return "unknown";
}

std::string to_string(Direction d) {
    return d == Direction::Increase ? "increase" : "decrease";
}

std::string to_string(Magnitude m) {
    switch (m) {
        case Magnitude::Large: return "large";
        case Magnitude::Moderate: return "moderate";
        case Magnitude::Small: return "small";
    }
    return "unknown";
}

Direction parse_direction(const std::string& s) {
    const std::string v = lowercase(trim(s));
    if (v == "increase") return Direction::Increase;
    if (v == "decrease") return Direction::Decrease;
    throw Error("invalid direction: '" + s + "'");
}

Magnitude parse_magnitude(const std::string& s) {
    const std::string v = lowercase(trim(s));
    if (v == "large") return Magnitude::Large;
    if (v == "moderate") return Magnitude::Moderate;
    if (v == "small") return Magnitude::Small;
    throw Error("invalid magnitude: '" + s + "'");
}

// ---------------------------------------------------------------------------
// Prompts. Wording is a frozen, versioned asset: changing it changes cache
// keys and experiment identity.
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kPromptVersion = "v1";

constexpr const char* kAnalystFraming =
    "You are a financial analyst. You are given the standardized, anonymized balance sheet "
    "and income statement of a company. Fiscal years are labeled t (most recent), t-1, and "
    "t-2; amounts are in millions.";

constexpr const char* kCotInstructions =
    "Perform a financial statement analysis and predict the direction of the company's "
    "earnings per share in fiscal year t+1. Follow these steps:\n"
    "1. Identify notable changes in financial statement line items across the years shown, "
    "and describe the trends you consider informative.\n"
    "2. Compute key financial ratios that you consider useful (for example operating "
    "efficiency, liquidity, or leverage ratios). For each ratio, state the formula first, "
    "then perform the computation.\n"
    "3. Provide economic interpretations of the computed ratios.\n"
    "4. Using the trends, the ratios, and your interpretations, predict whether earnings "
    "per share will increase or decrease in year t+1. Also give the expected magnitude of "
    "the change (one of \"large\", \"moderate\", or \"small\"), your confidence as a number "
    "between 0 and 1 (0 means a pure guess, 1 means perfectly informed), and a paragraph "
    "explaining the rationale behind your prediction.\n\n"
    "Respond with a single JSON object with exactly these keys:\n"
    "{\"trend analysis\": string, \"ratio analysis\": string, \"direction\": \"increase\" or "
    "\"decrease\", \"magnitude\": \"large\" or \"moderate\" or \"small\", \"confidence\": "
    "number between 0 and 1, \"reason\": string}\n"
    "Output only the JSON object.";

constexpr const char* kSimpleInstructions =
    "Predict whether the company's earnings per share will increase or decrease in fiscal "
    "year t+1.\n\n"
    "Respond with a single JSON object with exactly this key:\n"
    "{\"direction\": \"increase\" or \"decrease\"}\n"
    "Output only the JSON object.";

constexpr const char* kGuessInstructions =
    "Guess the identity of this company and the calendar year corresponding to fiscal year "
    "t. Provide the ten most probable company names, ordered from most probable to least "
    "probable, and the single most probable fiscal year as a four-digit calendar year. You "
    "must provide exactly ten names and one year even if you are uncertain: always make "
    "your best guess, never refuse.\n\n"
    "Respond with a single JSON object with exactly these keys:\n"
    "{\"firm_names\": [ten strings], \"fiscal_year\": integer}\n"
    "Output only the JSON object.";

}  // namespace

Prompt build_prompt(const PromptSpec& spec, const AnonymityLexicon& lexicon) {
    if (!verify_anonymity(spec.statements_text, lexicon)) {
        throw Error("refusing to build prompt: statements text failed the anonymity check");
    }
    Prompt p;
    p.system = kAnalystFraming;
    const char* instructions = nullptr;
    switch (spec.kind) {
        case PromptKind::Cot: instructions = kCotInstructions; break;
        case PromptKind::Simple: instructions = kSimpleInstructions; break;
        case PromptKind::GuessIdentity: instructions = kGuessInstructions; break;
    }
    p.user = spec.statements_text + "\n\n" + instructions;
    return p;
}

// ---------------------------------------------------------------------------
// Payload handling
// ---------------------------------------------------------------------------

ChatResponse parse_chat_payload(const std::string& payload_json) {
    json j;
    try {
        j = json::parse(payload_json);
    } catch (const json::exception& e) {
        throw ParseError(std::string("provider payload is not JSON: ") + e.what(), payload_json);
    }
    ChatResponse r;
    r.raw = payload_json;
    try {
        const json& choice = j.at("choices").at(0);
        r.content = choice.at("message").at("content").get<std::string>();
        if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
            choice["logprobs"].contains("content")) {
            for (const auto& tok : choice["logprobs"]["content"]) {
                TokenLogprob t;
                t.token = tok.value("token", "");
                t.logprob = tok.at("logprob").get<double>();
                r.token_logprobs.push_back(std::move(t));
            }
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("unexpected payload shape: ") + e.what(), payload_json);
    }
    return r;
}

namespace {

// Strips optional markdown fences and finds the JSON object.
std::string extract_json_object(const std::string& content) {
    const size_t start = content.find('{');
    const size_t end = content.rfind('}');
    if (start == std::string::npos || end == std::string::npos || end < start) {
        throw Error("no JSON object found in response content");
    }
    return content.substr(start, end - start + 1);
}

const json& require_key(const json& j, const char* key, const std::string& raw) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(strf("response missing key '%s'", key), raw);
    return *it;
}

std::string require_string(const json& j, const char* key, const std::string& raw) {
    const json& v = require_key(j, key, raw);
    if (!v.is_string()) throw ParseError(strf("key '%s' is not a string", key), raw);
    return v.get<std::string>();
}

}  // namespace

CotResponse parse_cot_response(const ChatResponse& response, PromptKind kind) {
    json j;
    try {
        j = json::parse(extract_json_object(response.content));
    } catch (const json::exception& e) {
        throw ParseError(std::string("response content is not valid JSON: ") + e.what(),
                         response.raw);
    } catch (const Error& e) {
        throw ParseError(e.what(), response.raw);
    }

    CotResponse r;
    r.raw = response.raw;
    try {
        r.direction = parse_direction(require_string(j, "direction", response.raw));
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        throw ParseError(e.what(), response.raw);
    }

    auto parse_optional = [&](const char* key) -> std::optional<std::string> {
        auto it = j.find(key);
        if (it == j.end() || it->is_null()) return std::nullopt;
        if (!it->is_string()) throw ParseError(strf("key '%s' is not a string", key), response.raw);
        return it->get<std::string>();
    };

    try {
        if (auto m = parse_optional("magnitude")) r.magnitude = parse_magnitude(*m);
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        throw ParseError(e.what(), response.raw);
    }
    if (auto it = j.find("confidence"); it != j.end() && !it->is_null()) {
        if (!it->is_number()) throw ParseError("key 'confidence' is not a number", response.raw);
        r.confidence = it->get<double>();
        if (!(*r.confidence >= 0.0 && *r.confidence <= 1.0)) {
            throw ParseError(strf("confidence %.6f outside [0,1]", *r.confidence), response.raw);
        }
    }
    if (auto s = parse_optional("trend analysis")) r.trend_analysis = *s;
    if (auto s = parse_optional("ratio analysis")) r.ratio_analysis = *s;
    if (auto s = parse_optional("reason")) r.rationale = *s;

    if (kind == PromptKind::Cot) {
        if (!r.magnitude) throw ParseError("response missing key 'magnitude'", response.raw);
        if (!r.confidence) throw ParseError("response missing key 'confidence'", response.raw);
        if (r.trend_analysis.empty())
            throw ParseError("response missing key 'trend analysis'", response.raw);
        if (r.ratio_analysis.empty())
            throw ParseError("response missing key 'ratio analysis'", response.raw);
        if (r.rationale.empty()) throw ParseError("response missing key 'reason'", response.raw);
    }

    for (const auto& t : response.token_logprobs) {
        if (t.logprob > 0.0) {
            throw ParseError(strf("token logprob %.6f is positive", t.logprob), response.raw);
        }
        r.token_logprobs.push_back(t.logprob);
    }
    return r;
}

GuessResponse parse_guess_response(const ChatResponse& response) {
    json j;
    try {
        j = json::parse(extract_json_object(response.content));
    } catch (const json::exception& e) {
        throw ParseError(std::string("response content is not valid JSON: ") + e.what(),
                         response.raw);
    } catch (const Error& e) {
        throw ParseError(e.what(), response.raw);
    }
    GuessResponse g;
    g.raw = response.raw;
    const json& names = require_key(j, "firm_names", response.raw);
    if (!names.is_array() || names.size() != 10) {
        throw ParseError("'firm_names' must be an array of exactly 10 names", response.raw);
    }
    for (const auto& n : names) {
        if (!n.is_string()) throw ParseError("'firm_names' entries must be strings", response.raw);
        g.firm_name_guesses.push_back(n.get<std::string>());
    }
    const json& year = require_key(j, "fiscal_year", response.raw);
    if (!year.is_number_integer()) {
        throw ParseError("'fiscal_year' must be an integer", response.raw);
    }
    g.year_guess = year.get<int>();
    if (g.year_guess < 1000 || g.year_guess > 9999) {
        throw ParseError(strf("'fiscal_year' %d is not a 4-digit year", g.year_guess),
                         response.raw);
    }
    return g;
}

std::string cot_response_to_json(const CotResponse& r) {
    json j;
    j["direction"] = to_string(r.direction);
    if (r.magnitude) j["magnitude"] = to_string(*r.magnitude);
    if (r.confidence) j["confidence"] = *r.confidence;
    j["trend analysis"] = r.trend_analysis;
    j["ratio analysis"] = r.ratio_analysis;
    j["reason"] = r.rationale;
    j["token_logprobs"] = r.token_logprobs;
    return j.dump();
}

CotResponse cot_response_from_json(const std::string& json_text) {
    const json j = json::parse(json_text);
    CotResponse r;
    r.direction = parse_direction(j.at("direction").get<std::string>());
    if (j.contains("magnitude")) r.magnitude = parse_magnitude(j["magnitude"].get<std::string>());
    if (j.contains("confidence")) r.confidence = j["confidence"].get<double>();
    r.trend_analysis = j.value("trend analysis", "");
    r.ratio_analysis = j.value("ratio analysis", "");
    r.rationale = j.value("reason", "");
    if (j.contains("token_logprobs")) {
        r.token_logprobs = j["token_logprobs"].get<std::vector<double>>();
    }
    return r;
}

double aggregate_logprob(const CotResponse& response) {
    if (response.token_logprobs.empty()) {
        throw Error("cannot aggregate log-probabilities: no output tokens recorded");
    }
    double sum = 0.0;
    for (double lp : response.token_logprobs) sum += lp;
    return sum / static_cast<double>(response.token_logprobs.size());
}

double aggregate_logprob_answer_tokens(const CotResponse& response) {
    // Locate the direction value inside the assistant content, then average
    // logprobs of tokens overlapping it. Requires token strings that
    // concatenate to the content; otherwise fall back to the full mean.
    ChatResponse chat;
    try {
        chat = parse_chat_payload(response.raw);
    } catch (const Error&) {
        return aggregate_logprob(response);
    }
    if (chat.token_logprobs.empty()) return aggregate_logprob(response);

    std::string concat;
    for (const auto& t : chat.token_logprobs) concat += t.token;
    if (concat != chat.content) return aggregate_logprob(response);

    const size_t key_pos = chat.content.find("\"direction\"");
    if (key_pos == std::string::npos) return aggregate_logprob(response);
    const size_t value_start = chat.content.find('"', key_pos + 11 + 1);
    if (value_start == std::string::npos) return aggregate_logprob(response);
    const size_t value_end = chat.content.find('"', value_start + 1);
    if (value_end == std::string::npos) return aggregate_logprob(response);

    double sum = 0.0;
    size_t count = 0;
    size_t offset = 0;
    for (const auto& t : chat.token_logprobs) {
        const size_t tok_start = offset;
        const size_t tok_end = offset + t.token.size();
        offset = tok_end;
        if (tok_end <= value_start + 1 || tok_start >= value_end) continue;
        sum += t.logprob;
        ++count;
    }
    if (count == 0) return aggregate_logprob(response);
    return sum / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// Mock provider
// ---------------------------------------------------------------------------

namespace {

std::string wrap_content_payload(const std::string& model, const json& content,
                                 const std::vector<double>& logprobs) {
    json payload;
    payload["model"] = model.empty() ? "mock" : model;
    json message;
    message["role"] = "assistant";
    message["content"] = content.dump();
    json lp_content = json::array();
    for (double lp : logprobs) {
        lp_content.push_back({{"token", "x"}, {"logprob", lp}});
    }
    payload["choices"] = json::array(
        {{{"message", message}, {"logprobs", {{"content", lp_content}}}}});
    return payload.dump();
}

}  // namespace

MockChatProvider::MockChatProvider(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open scripted responses file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error("scripted responses file " + path + " is not valid JSON: " + e.what());
    }
    if (j.contains("fallback")) fallback_ = j["fallback"].get<bool>();
    if (j.contains("responses")) {
        for (const auto& [key, value] : j["responses"].items()) {
            responses_[key] = value.dump();
        }
    }
}

void MockChatProvider::add_response(const std::string& key, const std::string& payload_json) {
    std::lock_guard lock(mu_);
    responses_[key] = payload_json;
}

ChatResponse MockChatProvider::complete(const ChatRequest& request) {
    std::string entry;
    {
        std::lock_guard lock(mu_);
        ++calls_;
        if (fail_next_ > 0) {
            --fail_next_;
            throw TransportError("mock transport failure");
        }
        auto it = responses_.find(request.tag);
        if (it == responses_.end() && !request.cache_key.empty()) {
            it = responses_.find(request.cache_key);
        }
        if (it == responses_.end()) {
            // last resort: digest of the full message text
            std::string text;
            for (const auto& m : request.messages) text += m.role + ":" + m.content + "\n";
            it = responses_.find(sha256_hex(text));
        }
        if (it != responses_.end()) entry = it->second;
    }

    if (entry.empty()) {
        if (!fallback_) {
            throw TransportError("mock provider has no scripted response for tag '" +
                                 request.tag + "'");
        }
        // Deterministic synthetic answer derived from the request digest.
        std::string text;
        for (const auto& m : request.messages) text += m.content;
        const uint64_t h = splitmix64(std::hash<std::string>{}(text) ^ 0x5eedULL);
        json content;
        const bool up = (h & 1) != 0;
        content["direction"] = up ? "increase" : "decrease";
        content["magnitude"] = (h >> 1) % 3 == 0 ? "large" : ((h >> 1) % 3 == 1 ? "moderate"
                                                                                : "small");
        content["confidence"] = 0.3 + 0.6 * static_cast<double>((h >> 8) % 1000) / 1000.0;
        content["trend analysis"] =
            strf("Scripted trend commentary %llu.", static_cast<unsigned long long>(h % 997));
        content["ratio analysis"] =
            strf("Scripted ratio commentary %llu.", static_cast<unsigned long long>(h % 991));
        content["reason"] =
            strf("Scripted rationale %llu.", static_cast<unsigned long long>(h % 983));
        std::vector<double> lps;
        for (int i = 0; i < 8; ++i) {
            lps.push_back(-0.001 - static_cast<double>(splitmix64(h + i) % 1000) / 1000.0);
        }
        return parse_chat_payload(wrap_content_payload(request.model, content, lps));
    }

    json j = json::parse(entry);
    if (j.is_object() && j.contains("choices")) {
        return parse_chat_payload(j.dump());
    }
    // content-style entry; optional "_token_logprobs" rides along
    std::vector<double> lps;
    if (j.contains("_token_logprobs")) {
        lps = j["_token_logprobs"].get<std::vector<double>>();
        j.erase("_token_logprobs");
    } else {
        lps = {-0.1, -0.2, -0.3};
    }
    return parse_chat_payload(wrap_content_payload(request.model, j, lps));
}

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(std::string directory) : dir_(std::move(directory)) {
    if (!dir_.empty()) fs::create_directories(dir_);
}

std::string ResponseCache::cache_key(const PromptSpec& spec, const Prompt& prompt) {
    const std::string material = std::string(kPromptVersion) + "\n" + to_string(spec.kind) +
                                 "\n" + spec.model_name + "\n" +
                                 strf("%.6f\n%.6f\n", spec.temperature, spec.top_p) +
                                 prompt.text();
    return sha256_hex(material);
}

std::optional<std::string> ResponseCache::lookup_raw(const std::string& key) const {
    if (!enabled()) return std::nullopt;
    const fs::path p = fs::path(dir_) / (key + ".json");
    std::ifstream in(p);
    if (!in) return std::nullopt;
    json j;
    try {
        in >> j;
        return j.at("raw").get<std::string>();
    } catch (const json::exception&) {
        return std::nullopt;  // unreadable entry behaves like a miss
    }
}

void ResponseCache::store(const std::string& key, const PromptSpec& spec,
                          const std::string& raw_payload, const std::string& parsed_json) {
    if (!enabled()) return;
    std::lock_guard lock(*write_mu_);
    const fs::path p = fs::path(dir_) / (key + ".json");
    if (fs::exists(p)) return;  // append-only
    json j;
    j["key"] = key;
    j["kind"] = to_string(spec.kind);
    j["model"] = spec.model_name;
    j["temperature"] = spec.temperature;
    j["top_p"] = spec.top_p;
    j["timestamp"] = static_cast<long long>(
        std::chrono::duration_cast<std::chrono::seconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count());
    j["raw"] = raw_payload;
    if (!parsed_json.empty()) j["parsed"] = json::parse(parsed_json);
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp);
        out << j.dump(2) << "\n";
    }
    fs::rename(tmp, p);
}

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

LlmClient::LlmClient(ChatProvider& provider, ResponseCache cache, AnonymityLexicon lexicon,
                     RetryPolicy retry)
    : provider_(provider), cache_(std::move(cache)), lexicon_(std::move(lexicon)),
      retry_(retry) {}

ChatResponse LlmClient::complete_with_retries(const ChatRequest& request) {
    int attempt = 0;
    while (true) {
        try {
            return provider_.complete(request);
        } catch (const TransportError&) {
            if (attempt >= retry_.max_transport_retries) throw;
            if (retry_.backoff_base_ms > 0) {
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(retry_.backoff_base_ms << attempt));
            }
            ++attempt;
        }
    }
}

ChatResponse LlmClient::fetch(const PromptSpec& spec, const Prompt& prompt,
                              const std::string& key, bool* from_cache) {
    if (auto raw = cache_.lookup_raw(key)) {
        *from_cache = true;
        return parse_chat_payload(*raw);
    }
    *from_cache = false;
    ChatRequest request;
    request.model = spec.model_name;
    request.temperature = spec.temperature;
    request.top_p = spec.top_p;
    request.logprobs = spec.logprobs_enabled;
    request.tag = spec.tag;
    request.cache_key = key;
    request.messages = {{"system", prompt.system}, {"user", prompt.user}};
    ChatResponse response = complete_with_retries(request);
    {
        std::lock_guard lock(mu_);
        ++provider_calls_;
    }
    return response;
}

namespace {

constexpr const char* kRepairInstruction =
    "Your previous reply did not match the required JSON schema. Respond again with only "
    "the JSON object, exactly in the requested format.";

}

PredictOutcome LlmClient::predict(const PromptSpec& spec) {
    PredictOutcome out;
    Prompt prompt;
    try {
        prompt = build_prompt(spec, lexicon_);
    } catch (const Error& e) {
        out.error = e.what();
        return out;
    }
    const std::string key = ResponseCache::cache_key(spec, prompt);
    ChatResponse chat;
    try {
        chat = fetch(spec, prompt, key, &out.from_cache);
    } catch (const Error& e) {
        out.error = e.what();
        return out;
    }

    try {
        CotResponse parsed = parse_cot_response(chat, spec.kind);
        cache_.store(key, spec, chat.raw, cot_response_to_json(parsed));
        out.response = std::move(parsed);
        return out;
    } catch (const ParseError& first) {
        if (!retry_.repair_retry || out.from_cache) {
            std::lock_guard lock(mu_);
            ++parse_failures_;
            out.error = std::string("parse error: ") + first.what();
            return out;
        }
        // One repair attempt: ask the model to reformat.
        ChatRequest request;
        request.model = spec.model_name;
        request.temperature = spec.temperature;
        request.top_p = spec.top_p;
        request.logprobs = spec.logprobs_enabled;
        request.tag = spec.tag.empty() ? spec.tag : spec.tag + ":repair";
        request.messages = {{"system", prompt.system},
                            {"user", prompt.user},
                            {"assistant", chat.content},
                            {"user", kRepairInstruction}};
        try {
            ChatResponse repaired = complete_with_retries(request);
            {
                std::lock_guard lock(mu_);
                ++provider_calls_;
            }
            CotResponse parsed = parse_cot_response(repaired, spec.kind);
            cache_.store(key, spec, repaired.raw, cot_response_to_json(parsed));
            out.response = std::move(parsed);
            return out;
        } catch (const Error& second) {
            std::lock_guard lock(mu_);
            ++parse_failures_;
            out.error = std::string("parse error after repair retry: ") + second.what();
            return out;
        }
    }
}

GuessOutcome LlmClient::guess_identity(const PromptSpec& spec) {
    GuessOutcome out;
    PromptSpec guess_spec = spec;
    guess_spec.kind = PromptKind::GuessIdentity;
    Prompt prompt;
    try {
        prompt = build_prompt(guess_spec, lexicon_);
    } catch (const Error& e) {
        out.error = e.what();
        return out;
    }
    const std::string key = ResponseCache::cache_key(guess_spec, prompt);
    ChatResponse chat;
    try {
        chat = fetch(guess_spec, prompt, key, &out.from_cache);
    } catch (const Error& e) {
        out.error = e.what();
        return out;
    }
    try {
        GuessResponse parsed = parse_guess_response(chat);
        cache_.store(key, guess_spec, chat.raw, "");
        out.response = std::move(parsed);
        return out;
    } catch (const ParseError& e) {
        std::lock_guard lock(mu_);
        ++parse_failures_;
        out.error = std::string("parse error: ") + e.what();
        return out;
    }
}

// ---------------------------------------------------------------------------

namespace {

std::string normalize_name(const std::string& s) {
    std::string out;
    bool last_space = true;
    for (char raw : s) {
        const unsigned char c = static_cast<unsigned char>(raw);
        if (std::isalnum(c)) {
            out += static_cast<char>(std::tolower(c));
            last_space = false;
        } else if (!last_space) {
            out += ' ';
            last_space = true;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

}  // namespace

bool names_match(const std::string& a, const std::string& b) {
    return normalize_name(a) == normalize_name(b) && !normalize_name(a).empty();
}

std::optional<size_t> guess_rank(const GuessResponse& guess, const std::string& true_name) {
    for (size_t i = 0; i < guess.firm_name_guesses.size(); ++i) {
        if (names_match(guess.firm_name_guesses[i], true_name)) return i;
    }
    return std::nullopt;
}

void parallel_for(size_t n, int parallelism, const std::function<void(size_t)>& fn) {
    if (parallelism <= 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> workers;
    const int threads = std::min<int>(parallelism, static_cast<int>(n));
    std::exception_ptr first_error;
    std::mutex err_mu;
    for (int t = 0; t < threads; ++t) {
        workers.emplace_back([&] {
            while (true) {
                const size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(err_mu);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& w : workers) w.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace fsa
