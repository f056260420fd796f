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

// Experiment orchestration: seeded training with periodic evaluation,
// evaluation over a fixed set of held-out environment seeds, memory
// transfer between tasks, report files and cache-only replay.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aec/controller.hpp"
#include "aec/episodic_memory.hpp"
#include "aec/gridworld.hpp"
#include "aec/llm_client.hpp"
#include "aec/world_graph.hpp"

namespace aec {

enum class Backend : std::uint8_t { oracle, llm };
std::string_view to_string(Backend b);
std::optional<Backend> parse_backend(std::string_view s);

enum class ExplorerKind : std::uint8_t { scripted, llm };
std::string_view to_string(ExplorerKind e);
std::optional<ExplorerKind> parse_explorer(std::string_view s);

struct RunConfig {
    Task task = Task::GoToLocal;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::int64_t frames = 25'000;
    Backend encoder = Backend::oracle;
    Backend critic = Backend::oracle;
    ExplorerKind explorer = ExplorerKind::scripted;
    double gamma = 0.99;
    Split split = Split::no_change;

    std::string endpoint;
    std::string model = "Qwen2.5-32B-Instruct";
    std::filesystem::path cache_dir = "llm_cache";
    CacheMode mode = CacheMode::online;
    int max_in_flight = 4;

    std::optional<std::filesystem::path> memory_in;
    std::filesystem::path out = "runs/latest";

    int eval_envs = 100;
    std::int64_t checkpoint_every = 5'000;
    /// Random-action rate of the scripted explorer while training.
    double explore_epsilon = 0.2;
    /// Chance that a critical memory hit explores instead, while training.
    double defer_epsilon = 0.1;
    /// Off for the memory-ablated baseline.
    bool commit = true;
    bool write_traces = true;
    std::optional<std::size_t> memory_cap;
    /// OpenMP threads for evaluation; 0 keeps the runtime default.
    int threads = 0;

    bool uses_llm() const {
        return encoder == Backend::llm || critic == Backend::llm || explorer == ExplorerKind::llm;
    }
    /// Throws ConfigError.
    void validate() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Missing keys keep their defaults; unknown keys are a ConfigError.
RunConfig config_from_json(const nlohmann::json& j);

/// Training layouts for a run seed; the top bit is always clear.
std::uint64_t train_env_seed(std::uint64_t run_seed, std::uint64_t episode);
/// Evaluation layouts; the top bit is always set, so the sets never meet.
std::uint64_t eval_env_seed(std::uint64_t index);

/// The four pluggable pieces an episode runs with.
struct Backends {
    std::unique_ptr<EncoderBackend> encoder;
    std::unique_ptr<CriticBackend> critic;
    std::unique_ptr<Explorer> explorer;
    std::unique_ptr<GraphUpdater> graph;
};

/// The world-graph updater follows the explorer: only the LLM explorer reads
/// the graph, so scripted runs keep the exact oracle graph.
Backends make_backends(const RunConfig& cfg, LlmClient* client, TranscriptLog* log, bool training);

struct EpisodeOptions {
    /// Null for greedy evaluation.
    Rng* rng = nullptr;
    double defer_epsilon = 0.0;
    /// Stops early once this many steps were taken (training frame budget).
    int frame_limit = std::numeric_limits<int>::max();
};

struct EpisodeResult {
    int steps = 0;
    bool success = false;
    bool truncated = false;
    double total_reward = 0.0;
    std::vector<DecisionTrace> traces;
    EpisodeBuffer buffer;
    WorldGraph graph;
    /// Step at which a key was first picked up / the target door opened, or -1.
    int key_pickup_step = -1;
    int door_open_step = -1;
};

/// reset -> (encode, decide, step, update graph, record) until done.
EpisodeResult run_episode(Environment& env, Backends& b, const EpisodicMemory* memory, const EpisodeOptions& opts);

struct InvocationCounts {
    std::int64_t steps = 0;
    std::int64_t episodic = 0;
    std::int64_t llm_policy = 0;
    std::int64_t scripted_policy = 0;

    void add(const DecisionTrace& t);
    void add(const InvocationCounts& o);
    /// Share of steps decided by the LLM policy.
    double llm_fraction() const { return steps ? static_cast<double>(llm_policy) / static_cast<double>(steps) : 0.0; }
    /// Share of steps handed to any exploration policy.
    double exploration_fraction() const {
        return steps ? static_cast<double>(llm_policy + scripted_policy) / static_cast<double>(steps) : 0.0;
    }
};

struct EvalResult {
    int n_envs = 0;
    int successes = 0;
    double success_rate = 0.0;
    std::int64_t frames = 0;
    InvocationCounts invocation;
};

/// Greedy evaluation on `n_envs` evaluation seeds; memory is read only.
/// The OpenMP kernel and the serial reference give identical results.
EvalResult evaluate(const EpisodicMemory& memory, const RunConfig& cfg, Split split, int n_envs,
                    LlmClient* client = nullptr);
EvalResult evaluate_serial(const EpisodicMemory& memory, const RunConfig& cfg, Split split, int n_envs,
                           LlmClient* client = nullptr);

struct BackendCounters {
    std::uint64_t encode_failures = 0;
    std::uint64_t critic_failures = 0;
    std::uint64_t explore_fallbacks = 0;
    std::uint64_t graph_violations = 0;
    std::uint64_t graph_parse_failures = 0;
};

struct SeedRun {
    std::uint64_t seed = 0;
    std::int64_t frames = 0;
    std::vector<std::vector<DecisionTrace>> episodes;
    std::vector<double> checkpoint_success;
    std::vector<std::size_t> checkpoint_memory_size;
    std::vector<std::string> checkpoint_memory;  ///< serialized snapshots
    InvocationCounts invocation;
    BackendCounters counters;
    std::optional<EpisodicMemory> memory;
};

struct RunReport {
    RunConfig config;
    std::vector<std::int64_t> checkpoints;
    std::vector<SeedRun> seeds;
    bool complete = true;
    std::string error;
    double wall_clock_s = 0.0;
    std::optional<std::string> memory_source;

    std::vector<double> final_success() const;
    InvocationCounts invocation() const;
};

/// Mean and sample standard deviation (nullopt below two values).
std::pair<double, std::optional<double>> mean_std(const std::vector<double>& v);

/// Trains one memory per seed. Backend failures end the run early with
/// `complete = false`; the partial report is still returned.
RunReport run_training(const RunConfig& cfg);

struct TransferReport {
    std::string target_task;
    std::string memory_source;
    RunReport cold;
    RunReport transferred;
};

/// Imports the foreign memory into a fresh one for the target task, then
/// continues training (or only evaluates when frames == 0); a cold start on
/// the same seeds is run alongside for comparison.
TransferReport run_transfer(const RunConfig& cfg, const std::filesystem::path& source_memory);

/// Writes config.json, learning_curve.csv, summary.json, invocation_rate.csv,
/// timing.json, traces/ and memory/ under `dir`.
void emit_outputs(const RunReport& report, const std::filesystem::path& dir);
void emit_transfer(const TransferReport& report, const std::filesystem::path& dir);

/// Deterministic, wall-clock free summary.
nlohmann::json summary_json(const RunReport& report);

struct ReplayResult {
    bool traces_identical = false;
    bool metrics_identical = false;
    std::string first_mismatch;
    RunReport report;
};

/// Re-runs `run_dir/config.json` in cache-only mode into `out` and compares
/// traces and summary with the recorded run.
ReplayResult replay(const std::filesystem::path& run_dir, const std::filesystem::path& out);

/// Episode traces of a run directory: [seed index][episode][step].
std::vector<std::vector<std::vector<DecisionTrace>>> load_traces(const std::filesystem::path& run_dir);

}  // namespace aec
