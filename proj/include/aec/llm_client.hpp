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

// Chat-completion client for OpenAI-compatible endpoints with a
// content-addressed response cache. With temperature 0 and a warm cache a run
// can be replayed offline bit for bit.

#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aec/core.hpp"

namespace aec {

class CacheMiss : public Error {
public:
    using Error::Error;
};

class EndpointError : public Error {
public:
    using Error::Error;
};

class MalformedResponse : public Error {
public:
    using Error::Error;
};

/// Raised by transports for failures worth retrying (timeouts, 429, 5xx).
class TransientError : public Error {
public:
    using Error::Error;
};

struct ChatMessage {
    std::string role;
    std::string content;
    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_tokens = 512;
    bool operator==(const ChatRequest&) const = default;
};

/// OpenAI chat-completions request body.
nlohmann::json to_json(const ChatRequest& r);
ChatRequest request_from_json(const nlohmann::json& j);

/// Sorted-key compact JSON; the input to the digest.
std::string canonical_serialization(const nlohmann::json& j);

/// Lowercase hex SHA-256 of the canonical serialization.
std::string request_digest(const ChatRequest& r);
std::string sha256_hex(std::string_view data);

enum class CacheMode : std::uint8_t { online, cache_only };
std::string_view to_string(CacheMode m);
std::optional<CacheMode> parse_cache_mode(std::string_view s);

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds base_delay{250};
    double multiplier = 2.0;
};

/// Wire-level sender. `post_chat` returns the raw response body.
class Transport {
public:
    virtual ~Transport() = default;
    virtual std::string post_chat(const std::string& body) = 0;
    virtual std::string identity() const = 0;
};

/// HTTP(S) transport for `<endpoint>/chat/completions`.
class HttpTransport final : public Transport {
public:
    HttpTransport(std::string endpoint, std::string api_key, std::chrono::seconds timeout = std::chrono::seconds(120));
    std::string post_chat(const std::string& body) override;
    std::string identity() const override { return endpoint_; }

private:
    std::string endpoint_;
    std::string api_key_;
    std::chrono::seconds timeout_;
    std::string scheme_host_port_;
    std::string path_prefix_;
};

/// Extracts choices[0].message.content; throws MalformedResponse.
std::string extract_completion_text(const std::string& body);

struct LlmClientConfig {
    std::string model = "Qwen2.5-32B-Instruct";
    std::filesystem::path cache_dir = ".aec_cache";
    CacheMode mode = CacheMode::online;
    RetryPolicy retry;
    int max_in_flight = 4;
    double temperature = 0.0;
    int max_tokens = 512;
};

class LlmClient {
public:
    /// `transport` may be null in cache-only mode.
    LlmClient(LlmClientConfig config, std::unique_ptr<Transport> transport);

    /// Cache hit returns the stored text without touching the network. A miss
    /// in online mode calls the endpoint (with backoff), stores the reply, then
    /// returns it; in cache-only mode it throws CacheMiss.
    std::string complete(const ChatRequest& request);

    /// Request with the configured model and sampling parameters.
    ChatRequest make_request(std::vector<ChatMessage> messages) const;

    struct Stats {
        std::uint64_t network_calls = 0;
        std::uint64_t cache_hits = 0;
        std::uint64_t cache_misses = 0;
        std::uint64_t retries = 0;
    };
    Stats stats() const;
    const LlmClientConfig& config() const { return config_; }

    std::filesystem::path cache_path(const std::string& digest) const;

private:
    std::optional<std::string> read_cache(const std::string& digest) const;
    void write_cache(const std::string& digest, const ChatRequest& request, const std::string& text) const;

    LlmClientConfig config_;
    std::unique_ptr<Transport> transport_;
    std::counting_semaphore<1024> in_flight_;
    std::atomic<std::uint64_t> network_calls_{0};
    std::atomic<std::uint64_t> cache_hits_{0};
    std::atomic<std::uint64_t> cache_misses_{0};
    std::atomic<std::uint64_t> retries_{0};
};

/// Thread-safe JSONL sink for prompt/reply transcripts.
class TranscriptLog {
public:
    explicit TranscriptLog(std::filesystem::path path);
    void append(const nlohmann::json& record);
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::mutex mu_;
};

}  // namespace aec
