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


// In-process OpenAI-compatible chat server for tests. Replies are computed
// from the prompt text by simple rules, so an LLM-backed run is fully
// deterministic and needs no network beyond loopback.

#pragma once

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <regex>
#include <sstream>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "aec/core.hpp"
#include "aec/encoder.hpp"

namespace aec::testing {

/// Text between `header` and the next blank-line-delimited all-caps header.
inline std::string prompt_section(const std::string& prompt, const std::string& header) {
    const auto at = prompt.find("\n" + header + "\n");
    if (at == std::string::npos) return {};
    std::istringstream in(prompt.substr(at + header.size() + 2));
    std::string out, line;
    bool started = false;
    while (std::getline(in, line)) {
        const bool caps = !line.empty() && std::all_of(line.begin(), line.end(), [](char c) {
            return std::isupper(static_cast<unsigned char>(c)) || c == ' ' || c == ':';
        });
        if (started && caps && line.size() > 3) break;
        if (line.empty()) {
            if (started) out += '\n';
            continue;
        }
        started = true;
        out += line + '\n';
    }
    while (!out.empty() && out.back() == '\n') out.pop_back();
    return out;
}

/// Reads the observation the way a careful model would: target sentences lose
/// their numbers, adjacent cells become obstacles.
inline std::string mock_encoder_reply(const std::string& prompt) {
    const std::string mission = prompt_section(prompt, "MISSION");
    const std::string input = prompt_section(prompt, "INPUT");
    // Last two words of the mission name the target.
    std::istringstream words(mission);
    std::vector<std::string> w;
    for (std::string x; words >> x;) w.push_back(x);
    const std::string target = w.size() >= 2 ? w[w.size() - 2] + " " + w.back() : "";

    StateKey key;
    std::istringstream lines(input);
    static const std::regex sentence(R"(You see an? (.+?) ((?:\d+ steps? (?:left|right))?(?: and )?(?:\d+ steps? forward)?)$)");
    for (std::string line; std::getline(lines, line);) {
        if (line.rfind("You carry", 0) == 0) {
            key.carrying = true;
            continue;
        }
        std::smatch m;
        if (!std::regex_match(line, m, sentence)) continue;
        const std::string what = m[1].str();
        const std::string where = m[2].str();
        const bool left = where.find("left") != std::string::npos;
        const bool right = where.find("right") != std::string::npos;
        const bool fwd = where.find("forward") != std::string::npos;
        if (!target.empty() && what == target) {
            std::string phrase = left ? "left" : right ? "right" : "";
            if (fwd) phrase += phrase.empty() ? "forward" : " and forward";
            key.target_directions.push_back(phrase);
            if (where == "1 step forward") key.target_one_step_forward = true;
        }
        const auto entity = normalize_entity(what);
        if (!entity) continue;
        if (where == "1 step forward") key.obstacles[0] = entity;
        if (where == "1 step left") key.obstacles[1] = entity;
        if (where == "1 step right") key.obstacles[2] = entity;
    }
    return format_encoder_output(key);
}

inline std::string mock_reply(const std::string& prompt, std::uint64_t salt) {
    if (prompt.find("STEP 0 - PARSE MISSION") != std::string::npos) return mock_encoder_reply(prompt);
    if (prompt.find("determine if there is a target direction") != std::string::npos)
        return prompt.find("Output list: none") != std::string::npos ? "no" : "Yes.";
    if (prompt.find("Always retain all items and triplets") != std::string::npos)
        return prompt_section(prompt, "PREVIOUS WORLD MODEL");
    if (prompt.find("ACTION SPACE") != std::string::npos) {
        // Mostly forward, with prompt-dependent turns to get around obstacles.
        static constexpr const char* choices[] = {"go forward", "go forward", "turn left", "turn right", "toggle"};
        const std::uint64_t h = mix64(std::hash<std::string>{}(prompt) ^ salt);
        if (prompt_section(prompt, "CURRENT OBSERVATION").find("1 step forward") != std::string::npos)
            return (h & 1) ? "turn left" : "turn right";
        return choices[h % 5];
    }
    return "I cannot help with that.";
}

/// Serves POST /v1/chat/completions on a free loopback port.
class MockOpenAi {
public:
    /// The first `fail_first` requests get HTTP 503.
    explicit MockOpenAi(int fail_first = 0, std::uint64_t salt = 0) : fail_left_(fail_first), salt_(salt) {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            ++requests_;
            if (fail_left_.fetch_sub(1) > 0) {
                res.status = 503;
                res.set_content("busy", "text/plain");
                return;
            }
            const auto body = nlohmann::json::parse(req.body);
            std::string prompt;
            for (const auto& m : body.at("messages"))
                if (m.at("role") == "user") {
                    prompt = m.at("content").get<std::string>();
                    break;
                }
            const nlohmann::json reply{
                {"id", "mock"},
                {"object", "chat.completion"},
                {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", mock_reply(prompt, salt_)}}},
                              {"finish_reason", "stop"}}}}};
            res.set_content(reply.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~MockOpenAi() {
        server_.stop();
        thread_.join();
    }
    MockOpenAi(const MockOpenAi&) = delete;
    MockOpenAi& operator=(const MockOpenAi&) = delete;

    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
    int requests() const { return requests_.load(); }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<int> requests_{0};
    std::atomic<int> fail_left_;
    std::uint64_t salt_;
};

}  // namespace aec::testing
