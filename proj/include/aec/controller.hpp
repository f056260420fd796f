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

// Per-step arbitration. A state is critical when the target's direction is
// known; critical states with a memory hit act on the stored best action,
// everything else goes to an exploration policy.

#pragma once

#include <atomic>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aec/encoder.hpp"
#include "aec/episodic_memory.hpp"
#include "aec/rng.hpp"
#include "aec/world_graph.hpp"

namespace aec {

enum class Mode : std::uint8_t { explore, exploit };
enum class DecisionSource : std::uint8_t { episodic, llm_policy, scripted_policy };

std::string_view to_string(Mode m);
std::string_view to_string(DecisionSource s);
std::optional<Mode> parse_mode(std::string_view s);
std::optional<DecisionSource> parse_source(std::string_view s);

struct DecisionTrace {
    int step = 0;
    Mode mode = Mode::explore;
    bool critical = false;
    std::string key;  ///< canonical form; empty when encoding failed
    Action action = Action::turn_left;
    DecisionSource source = DecisionSource::scripted_policy;
    double latency_ms = 0.0;
    /// Recoverable backend failures hit while deciding this step.
    std::vector<std::string> notes;

    /// Everything except latency, which is wall-clock.
    bool same_decision(const DecisionTrace& o) const;
};

nlohmann::json to_json(const DecisionTrace& t);
DecisionTrace trace_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Criticality
// ---------------------------------------------------------------------------

class CriticBackend {
public:
    virtual ~CriticBackend() = default;
    virtual bool is_critical(const StateKey& key, std::string_view mission) = 0;
    virtual std::string_view name() const = 0;
    /// Replies that stayed unreadable after re-prompts (treated as non-critical).
    std::uint64_t failures() const { return failures_.load(); }

protected:
    std::atomic<std::uint64_t> failures_{0};
};

/// Reference predicate: some direction to the target is known.
bool oracle_is_critical(const StateKey& key);

class OracleCritic final : public CriticBackend {
public:
    bool is_critical(const StateKey& key, std::string_view) override { return oracle_is_critical(key); }
    std::string_view name() const override { return "oracle"; }
};

std::string build_critic_prompt(Task task, std::string_view mission, const StateKey& key);
/// Strict: "yes" or "no", case-insensitive, optional trailing period or quotes.
std::optional<bool> parse_critic_reply(std::string_view reply);

class LlmCritic final : public CriticBackend {
public:
    LlmCritic(LlmClient& client, Task task, TranscriptLog* log = nullptr, int max_reprompts = 2)
        : client_(client), task_(task), log_(log), max_reprompts_(max_reprompts) {}
    bool is_critical(const StateKey& key, std::string_view mission) override;
    std::string_view name() const override { return "llm"; }
    /// Well-formed replies that disagreed with the reference predicate.
    std::uint64_t disagreements() const { return disagreements_.load(); }

private:
    LlmClient& client_;
    Task task_;
    TranscriptLog* log_;
    int max_reprompts_;
    std::atomic<std::uint64_t> disagreements_{0};
};

bool is_critical(const StateKey& key, std::string_view mission, CriticBackend& backend);

/// Stored best action for the key, or nullopt on a miss.
std::optional<Action> exploit(const EpisodicMemory& memory, const CanonicalKey& key);

// ---------------------------------------------------------------------------
// Exploration
// ---------------------------------------------------------------------------

/// Sliding window of (observation, action) pairs, newest last.
class History {
public:
    explicit History(std::size_t capacity = 8) : capacity_(capacity) {}
    void push(std::string observation, Action action);
    void clear() {
        items_.clear();
        taken_.clear();
    }
    std::size_t size() const { return items_.size(); }
    /// Text for the prompt's history slot; "(none)" when empty.
    std::string render() const;
    /// How often (observation, action) was pushed this episode, window or not.
    int count(const std::string& observation, Action action) const;
    std::optional<Action> last_action() const;

private:
    std::size_t capacity_;
    std::deque<std::pair<std::string, Action>> items_;
    std::map<std::pair<std::string, Action>, int> taken_;
};

struct ExploreRequest {
    const Observation& obs;
    const WorldGraph& graph;
    const History& history;
    const FullState& truth;
    /// Null in evaluation: the scripted policy is then fully deterministic.
    Rng* rng = nullptr;
};

struct ExploreResult {
    Action action = Action::turn_left;
    DecisionSource source = DecisionSource::scripted_policy;
    std::string note;
};

class Explorer {
public:
    virtual ~Explorer() = default;
    virtual void reset(const FullState& initial) = 0;
    /// Called once per step before deciding, whoever ends up acting.
    virtual void observe(const FullState& s) = 0;
    virtual ExploreResult explore(const ExploreRequest& req) = 0;
    virtual std::string_view name() const = 0;
};

struct ScriptedExplorerOptions {
    /// Probability of a uniformly random action when an Rng is supplied.
    double epsilon = 0.0;
};

/// Frontier explorer over the true layout: walk to the nearest cell that
/// borders unseen space (opening closed doors on the way), otherwise to the
/// least recently visited cell. Reflexes: pick up keys in the unlock task,
/// open the target door once its key is held.
class ScriptedExplorer final : public Explorer {
public:
    explicit ScriptedExplorer(ScriptedExplorerOptions opts = {}) : opts_(opts) {}
    void reset(const FullState& initial) override;
    void observe(const FullState& s) override;
    ExploreResult explore(const ExploreRequest& req) override;
    std::string_view name() const override { return "scripted"; }

    /// The deterministic choice, without the random override.
    Action plan(const FullState& s) const;

private:
    ScriptedExplorerOptions opts_;
    int width_ = 0;
    int tick_ = 0;
    std::vector<bool> seen_;
    std::vector<int> last_visit_;  ///< -1 = never
};

std::string build_explore_prompt(Task task, const Observation& obs, const WorldGraph& graph, const History& history);
/// Exactly one action phrase (underscored ids accepted), surrounding punctuation ignored.
std::optional<Action> parse_explore_reply(std::string_view reply);

/// Falls back to the scripted policy for the step when replies stay invalid.
class LlmExplorer final : public Explorer {
public:
    LlmExplorer(LlmClient& client, Task task, TranscriptLog* log = nullptr, int max_reprompts = 2)
        : client_(client), task_(task), log_(log), max_reprompts_(max_reprompts) {}
    void reset(const FullState& initial) override { fallback_.reset(initial); }
    void observe(const FullState& s) override { fallback_.observe(s); }
    ExploreResult explore(const ExploreRequest& req) override;
    std::string_view name() const override { return "llm"; }
    std::uint64_t fallbacks() const { return fallbacks_.load(); }

private:
    LlmClient& client_;
    Task task_;
    TranscriptLog* log_;
    int max_reprompts_;
    ScriptedExplorer fallback_;
    std::atomic<std::uint64_t> fallbacks_{0};
};

// ---------------------------------------------------------------------------
// Decision
// ---------------------------------------------------------------------------

struct DecisionContext {
    int step = 0;
    const Observation& obs;
    /// Nullopt when the encoder failed; the step then explores.
    const std::optional<StateKey>& key;
    const WorldGraph& graph;
    const History& history;
    const FullState& truth;
};

struct DecideOptions {
    /// A stored action already taken this often from the identical
    /// observation earlier in the episode is skipped for this step.
    int loop_repeats = 1;
    /// Training only: chance that a critical hit still explores, so that
    /// alternatives to the stored action keep being tried.
    double defer_epsilon = 0.0;
    Rng* rng = nullptr;
};

struct Decision {
    Action action = Action::turn_left;
    DecisionTrace trace;
};

/// `memory` may be null (nothing to exploit).
Decision decide(const DecisionContext& ctx, const EpisodicMemory* memory, CriticBackend& critic, Explorer& explorer,
                const DecideOptions& opts = {});

}  // namespace aec
