// Copyright 2026 The AEC Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "aec/llm_client.hpp"

#include <openssl/evp.h>

#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "aec/prompts.hpp"

namespace aec {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Requests and digests
// ---------------------------------------------------------------------------

json to_json(const ChatRequest& r) {
    json messages = json::array();
    for (const auto& m : r.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    return json{{"model", r.model},
                {"messages", std::move(messages)},
                {"temperature", r.temperature},
                {"max_tokens", r.max_tokens}};
}

ChatRequest request_from_json(const json& j) {
    ChatRequest r;
    r.model = j.at("model").get<std::string>();
    for (const auto& m : j.at("messages"))
        r.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
    r.temperature = j.value("temperature", 0.0);
    r.max_tokens = j.value("max_tokens", 512);
    return r;
}

std::string canonical_serialization(const json& j) {
    // nlohmann::json objects are std::map-backed, so keys are already sorted.
    return j.dump(-1, ' ', false, json::error_handler_t::strict);
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 computation failed");
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return out.str();
}

std::string request_digest(const ChatRequest& r) {
    json j = to_json(r);
    j["template_version"] = prompts::kTemplateVersion;
    return sha256_hex(canonical_serialization(j));
}

std::string_view to_string(CacheMode m) { return m == CacheMode::online ? "online" : "cache-only"; }

std::optional<CacheMode> parse_cache_mode(std::string_view s) {
    const std::string v = to_lower(trim(s));
    if (v == "online") return CacheMode::online;
    if (v == "cache-only" || v == "cache_only" || v == "offline") return CacheMode::cache_only;
    return std::nullopt;
}

std::string extract_completion_text(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw MalformedResponse(std::string("response is not JSON: ") + e.what());
    }
    try {
        const auto& content = j.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) throw MalformedResponse("message content is not a string");
        return content.get<std::string>();
    } catch (const json::exception& e) {
        throw MalformedResponse(std::string("response lacks choices[0].message.content: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// HTTP transport
// ---------------------------------------------------------------------------

HttpTransport::HttpTransport(std::string endpoint, std::string api_key, std::chrono::seconds timeout)
    : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)), timeout_(timeout) {
    while (!endpoint_.empty() && endpoint_.back() == '/') endpoint_.pop_back();
    const auto scheme_end = endpoint_.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint must start with http:// or https://");
    const auto path_start = endpoint_.find('/', scheme_end + 3);
    scheme_host_port_ = endpoint_.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? std::string() : endpoint_.substr(path_start);
}

std::string HttpTransport::post_chat(const std::string& body) {
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = client.Post(path_prefix_ + "/chat/completions", headers, body, "application/json");
    if (!res) throw TransientError("request to " + endpoint_ + " failed: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500)
        throw TransientError("endpoint returned HTTP " + std::to_string(res->status));
    if (res->status != 200)
        throw EndpointError("endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    return res->body;
}

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

LlmClient::LlmClient(LlmClientConfig config, std::unique_ptr<Transport> transport)
    : config_(std::move(config)), transport_(std::move(transport)),
      in_flight_(std::clamp(config_.max_in_flight, 1, 1024)) {
    if (config_.mode == CacheMode::online && !transport_)
        throw ConfigError("online mode needs an endpoint; use cache-only mode for offline replay");
    std::filesystem::create_directories(config_.cache_dir);
}

ChatRequest LlmClient::make_request(std::vector<ChatMessage> messages) const {
    if (messages.empty()) throw UsageError("chat request needs at least one message");
    return {config_.model, std::move(messages), config_.temperature, config_.max_tokens};
}

std::filesystem::path LlmClient::cache_path(const std::string& digest) const {
    return config_.cache_dir / (digest + ".json");
}

std::optional<std::string> LlmClient::read_cache(const std::string& digest) const {
    std::ifstream in(cache_path(digest));
    if (!in) return std::nullopt;
    try {
        const json j = json::parse(in);
        if (j.at("digest").get<std::string>() != digest) return std::nullopt;
        return j.at("response").get<std::string>();
    } catch (const json::exception&) {
        return std::nullopt;  // a torn or foreign file counts as a miss
    }
}

void LlmClient::write_cache(const std::string& digest, const ChatRequest& request, const std::string& text) const {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream ts;
    ts << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    const json record{{"digest", digest},
                      {"request", to_json(request)},
                      {"response", text},
                      {"timestamp", ts.str()},
                      {"endpoint", transport_ ? transport_->identity() : std::string()}};
    std::ostringstream tmp_name;
    tmp_name << digest << ".tmp." << std::this_thread::get_id();
    const auto tmp = config_.cache_dir / tmp_name.str();
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << record.dump(2) << '\n';
        if (!out) throw Error("cannot write cache file " + tmp.string());
    }
    std::filesystem::rename(tmp, cache_path(digest));
}

std::string LlmClient::complete(const ChatRequest& request) {
    if (request.messages.empty()) throw UsageError("chat request needs at least one message");
    const std::string digest = request_digest(request);
    if (auto hit = read_cache(digest)) {
        ++cache_hits_;
        return *hit;
    }
    ++cache_misses_;
    if (config_.mode == CacheMode::cache_only) throw CacheMiss("no cached response for request " + digest);

    const std::string body = canonical_serialization(to_json(request));
    std::string last_error;
    auto delay = config_.retry.base_delay;
    for (int attempt = 0; attempt < config_.retry.attempts; ++attempt) {
        if (attempt > 0) {
            ++retries_;
            std::this_thread::sleep_for(delay);
            delay = std::chrono::milliseconds(static_cast<long long>(delay.count() * config_.retry.multiplier));
        }
        std::string response;
        in_flight_.acquire();
        try {
            ++network_calls_;
            response = transport_->post_chat(body);
        } catch (const TransientError& e) {
            in_flight_.release();
            last_error = e.what();
            continue;
        } catch (...) {
            in_flight_.release();
            throw;
        }
        in_flight_.release();
        const std::string text = extract_completion_text(response);
        write_cache(digest, request, text);
        return text;
    }
    throw EndpointError("endpoint failed after " + std::to_string(config_.retry.attempts) + " attempts: " + last_error);
}

LlmClient::Stats LlmClient::stats() const {
    return {network_calls_.load(), cache_hits_.load(), cache_misses_.load(), retries_.load()};
}

TranscriptLog::TranscriptLog(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream(path_, std::ios::trunc);
}

void TranscriptLog::append(const json& record) {
    std::lock_guard lock(mu_);
    std::ofstream out(path_, std::ios::app);
    out << record.dump() << '\n';
}

}  // namespace aec
