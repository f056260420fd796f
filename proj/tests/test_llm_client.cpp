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


#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <set>
#include <thread>
#include <unordered_set>

#include "aec/llm_client.hpp"
#include "aec/rng.hpp"
#include "support/fake_transport.hpp"
#include "support/mock_openai.hpp"

using namespace aec;
using nlohmann::json;
using testing::completion_body;
using testing::FakeTransport;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "aec_tests" / name;
    std::filesystem::remove_all(dir);
    return dir;
}

LlmClientConfig fast_config(const std::string& name) {
    LlmClientConfig c;
    c.cache_dir = fresh_dir(name);
    c.retry.base_delay = std::chrono::milliseconds(1);
    return c;
}

ChatRequest hello(const LlmClient& c, const std::string& text = "hello") { return c.make_request({{"user", text}}); }

}  // namespace

TEST_SUITE("llm_client") {

TEST_CASE("second identical request is served from the cache") {
    auto t = std::make_unique<FakeTransport>();
    auto* fake = t.get();
    LlmClient c(fast_config("cache_hit"), std::move(t));
    CHECK(c.complete(hello(c)) == "ok");
    CHECK(c.complete(hello(c)) == "ok");
    CHECK(fake->calls == 1);
    CHECK(c.stats().cache_hits == 1);
    CHECK(std::filesystem::exists(c.cache_path(request_digest(hello(c)))));
}

TEST_CASE("cache-only mode raises CacheMiss on a new request and replays old ones") {
    auto cfg = fast_config("cache_only");
    {
        LlmClient online(cfg, std::make_unique<FakeTransport>());
        online.complete(hello(online, "seen"));
    }
    cfg.mode = CacheMode::cache_only;
    LlmClient offline(cfg, nullptr);
    CHECK(offline.complete(hello(offline, "seen")) == "ok");
    CHECK_THROWS_AS(offline.complete(hello(offline, "novel")), CacheMiss);
    CHECK(offline.stats().network_calls == 0);

    cfg.mode = CacheMode::online;
    CHECK_THROWS_AS(LlmClient(cfg, nullptr), ConfigError);
}

TEST_CASE("transient failures are retried, then surface as EndpointError") {
    auto t = std::make_unique<FakeTransport>();
    auto* fake = t.get();
    fake->transient_failures = 2;
    LlmClient c(fast_config("retry"), std::move(t));
    CHECK(c.complete(hello(c)) == "ok");
    CHECK(fake->calls == 3);
    CHECK(c.stats().retries == 2);

    fake->transient_failures = 5;
    CHECK_THROWS_AS(c.complete(hello(c, "other")), EndpointError);
    // Nothing was cached for the failed request.
    CHECK_FALSE(std::filesystem::exists(c.cache_path(request_digest(hello(c, "other")))));
}

TEST_CASE("malformed bodies raise MalformedResponse") {
    auto t = std::make_unique<FakeTransport>();
    t->reply = [](const std::string&) { return std::string(R"({"choices": []})"); };
    LlmClient c(fast_config("malformed"), std::move(t));
    CHECK_THROWS_AS(c.complete(hello(c)), MalformedResponse);
    CHECK_THROWS_AS(extract_completion_text("not json"), MalformedResponse);
    CHECK(extract_completion_text(completion_body("hi")) == "hi");
}

TEST_CASE("digest ignores key order in the serialized request") {
    const std::vector<std::string> fields{R"("model":"m")", R"("temperature":0.0)", R"("max_tokens":64)",
                                          R"("messages":[{"role":"user","content":"x"}])"};
    std::vector<std::size_t> order{0, 1, 2, 3};
    std::set<std::string> digests;
    do {
        std::string body = "{";
        for (std::size_t i = 0; i < order.size(); ++i) body += (i ? "," : "") + fields[order[i]];
        body += "}";
        digests.insert(request_digest(request_from_json(json::parse(body))));
        // Swap the two keys inside the message object too.
        std::string swapped = body;
        const std::string msg = R"({"role":"user","content":"x"})";
        swapped.replace(swapped.find(msg), msg.size(), R"({"content":"x","role":"user"})");
        digests.insert(request_digest(request_from_json(json::parse(swapped))));
    } while (std::next_permutation(order.begin(), order.end()));
    CHECK(digests.size() == 1);
}

TEST_CASE("digest is deterministic and field sensitive") {
    ChatRequest a{"m", {{"user", "x"}}, 0.0, 64};
    ChatRequest b = a;
    CHECK(request_digest(a) == request_digest(b));
    b.temperature = 0.1;
    CHECK(request_digest(a) != request_digest(b));
    b = a;
    b.messages[0].role = "system";
    CHECK(request_digest(a) != request_digest(b));
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("10k random requests give 10k digests") {
    Rng rng(1);
    std::unordered_set<std::string> seen;
    std::set<std::string> bodies;
    for (int i = 0; i < 10'000; ++i) {
        ChatRequest r;
        r.model = "m" + std::to_string(rng.below(3));
        std::string content;
        for (int k = static_cast<int>(rng.below(12)) + 4; k > 0; --k) content += static_cast<char>('a' + rng.below(4));
        r.messages.push_back({rng.chance(0.5) ? "user" : "system", content});
        r.temperature = static_cast<double>(rng.below(3)) / 10.0;
        r.max_tokens = 256 << rng.below(2);
        if (bodies.insert(canonical_serialization(to_json(r))).second) seen.insert(request_digest(r));
    }
    CHECK(seen.size() == bodies.size());
    CHECK(bodies.size() > 9000);
}

TEST_CASE("in-flight requests never exceed the configured bound") {
    auto t = std::make_unique<FakeTransport>();
    auto* fake = t.get();
    fake->hold = std::chrono::milliseconds(5);
    auto cfg = fast_config("bounded");
    cfg.max_in_flight = 3;
    LlmClient c(cfg, std::move(t));
    std::vector<std::thread> threads;
    for (int i = 0; i < 12; ++i)
        threads.emplace_back([&, i] {
            for (int k = 0; k < 4; ++k) c.complete(hello(c, "t" + std::to_string(i) + "/" + std::to_string(k)));
        });
    for (auto& th : threads) th.join();
    CHECK(fake->calls == 48);
    CHECK(fake->peak <= 3);
    CHECK(fake->peak >= 1);
}

TEST_CASE("HTTP transport talks to an OpenAI-compatible server") {
    testing::MockOpenAi server(/*fail_first=*/1);
    auto cfg = fast_config("http");
    LlmClient c(cfg, std::make_unique<HttpTransport>(server.endpoint(), "sk-test"));
    const std::string prompt = "determine if there is a target direction\nSTEP 1 - Output list: none";
    CHECK(c.complete(hello(c, prompt)) == "no");
    CHECK(server.requests() == 2);  // one 503, one success
    CHECK(c.complete(hello(c, prompt)) == "no");
    CHECK(server.requests() == 2);

    LlmClient unreachable(fast_config("http_down"), std::make_unique<HttpTransport>("http://127.0.0.1:1/v1", ""));
    CHECK_THROWS_AS(unreachable.complete(hello(unreachable)), EndpointError);
    CHECK_THROWS_AS(HttpTransport("localhost:8000", ""), ConfigError);
}

}  // TEST_SUITE
