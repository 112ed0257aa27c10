// HTTP-backed providers live in their own translation unit so the rest of the
// library does not pay for httplib/OpenSSL compilation.
//
// Library headers (and Eigen behind them) must come before httplib: the
// resolver headers it drags in define a `_res` macro that mangles Eigen.
#include "fsa/llm_client.hpp"
#include "fsa/narrative.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>
#include <thread>

#include <json.hpp>

namespace fsa {

using nlohmann::json;

HttpChatProvider::HttpChatProvider(Options options) : options_(std::move(options)) {
    if (options_.base_url.empty()) throw Error("HttpChatProvider: base_url is required");
}

// Serializes request starts so the per-minute budget is respected even when
// callers fan out across threads.
void HttpChatProvider::pace() {
    if (options_.max_requests_per_minute <= 0) return;
    const auto interval =
        std::chrono::microseconds(60'000'000 / options_.max_requests_per_minute);
    std::chrono::steady_clock::time_point wait_until;
    {
        std::lock_guard lock(pace_mu_);
        const auto now = std::chrono::steady_clock::now();
        if (next_slot_ < now) next_slot_ = now;
        wait_until = next_slot_;
        next_slot_ += interval;
    }
    std::this_thread::sleep_until(wait_until);
}

ChatResponse HttpChatProvider::complete(const ChatRequest& request) {
    pace();
    json body;
    body["model"] = request.model;
    body["temperature"] = request.temperature;
    body["top_p"] = request.top_p;
    if (request.logprobs) body["logprobs"] = true;
    body["messages"] = json::array();
    for (const auto& m : request.messages) {
        body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    }

    httplib::Client client(options_.base_url);
    client.set_connection_timeout(options_.timeout_seconds);
    client.set_read_timeout(options_.timeout_seconds);
    httplib::Headers headers;
    if (!options_.api_key_env.empty()) {
        const char* key = std::getenv(options_.api_key_env.c_str());
        if (!key || !*key) {
            throw Error("credentials environment variable not set: " + options_.api_key_env);
        }
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    auto res = client.Post(options_.path, headers, body.dump(), "application/json");
    if (!res) {
        throw TransportError("chat request to " + options_.base_url +
                             " failed: " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw TransportError(strf("chat request returned HTTP %d: %s", res->status,
                                  res->body.substr(0, 500).c_str()));
    }
    return parse_chat_payload(res->body);
}

HttpEmbeddingProvider::HttpEmbeddingProvider(Options options) : options_(std::move(options)) {
    if (options_.base_url.empty()) throw Error("HttpEmbeddingProvider: base_url is required");
    if (options_.dimension <= 0) throw Error("HttpEmbeddingProvider: dimension is required");
}

std::vector<double> HttpEmbeddingProvider::embed(const std::string& text) {
    json body;
    body["model"] = options_.model;
    body["input"] = text;

    httplib::Client client(options_.base_url);
    client.set_connection_timeout(options_.timeout_seconds);
    client.set_read_timeout(options_.timeout_seconds);
    httplib::Headers headers;
    if (!options_.api_key_env.empty()) {
        const char* key = std::getenv(options_.api_key_env.c_str());
        if (!key || !*key) {
            throw Error("credentials environment variable not set: " + options_.api_key_env);
        }
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    auto res = client.Post(options_.path, headers, body.dump(), "application/json");
    if (!res) {
        throw TransportError("embedding request to " + options_.base_url +
                             " failed: " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw TransportError(strf("embedding request returned HTTP %d", res->status));
    }
    json j = json::parse(res->body);
    std::vector<double> v = j.at("data").at(0).at("embedding").get<std::vector<double>>();
    if (static_cast<int>(v.size()) != options_.dimension) {
        throw Error(strf("embedding dimension mismatch: got %zu, expected %d", v.size(),
                         options_.dimension));
    }
    return v;
}

}  // namespace fsa
