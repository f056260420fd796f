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

#include "aec/harness.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace aec {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Backend b) { return b == Backend::llm ? "llm" : "oracle"; }

std::optional<Backend> parse_backend(std::string_view s) {
    const std::string v = to_lower(trim(s));
    if (v == "oracle") return Backend::oracle;
    if (v == "llm") return Backend::llm;
    return std::nullopt;
}

std::string_view to_string(ExplorerKind e) { return e == ExplorerKind::llm ? "llm" : "scripted"; }

std::optional<ExplorerKind> parse_explorer(std::string_view s) {
    const std::string v = to_lower(trim(s));
    if (v == "scripted") return ExplorerKind::scripted;
    if (v == "llm") return ExplorerKind::llm;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void RunConfig::validate() const {
    if (frames <= 0) throw ConfigError("frame budget must be positive, got " + std::to_string(frames));
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
        throw ConfigError("seeds must be distinct");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
    if (eval_envs < 1) throw ConfigError("eval_envs must be at least 1");
    if (checkpoint_every <= 0) throw ConfigError("checkpoint_every must be positive");
    if (explore_epsilon < 0.0 || explore_epsilon > 1.0) throw ConfigError("explore_epsilon must lie in [0, 1]");
    if (defer_epsilon < 0.0 || defer_epsilon > 1.0) throw ConfigError("defer_epsilon must lie in [0, 1]");
    if (uses_llm() && mode == CacheMode::online && endpoint.empty())
        throw ConfigError("LLM backends in online mode need --endpoint (or use --mode cache-only)");
    if (!uses_llm() && !endpoint.empty())
        throw ConfigError("oracle/scripted backends take no endpoint; drop --endpoint or select an llm backend");
    if (max_in_flight < 1) throw ConfigError("max_in_flight must be at least 1");
}

json to_json(const RunConfig& c) {
    json j{{"task", to_string(c.task)},
           {"seeds", c.seeds},
           {"frames", c.frames},
           {"encoder", to_string(c.encoder)},
           {"critic", to_string(c.critic)},
           {"explorer", to_string(c.explorer)},
           {"gamma", c.gamma},
           {"split", to_string(c.split)},
           {"endpoint", c.endpoint},
           {"model", c.model},
           {"cache_dir", c.cache_dir.string()},
           {"mode", to_string(c.mode)},
           {"max_in_flight", c.max_in_flight},
           {"memory_in", c.memory_in ? json(c.memory_in->string()) : json(nullptr)},
           {"out", c.out.string()},
           {"eval_envs", c.eval_envs},
           {"checkpoint_every", c.checkpoint_every},
           {"explore_epsilon", c.explore_epsilon},
           {"defer_epsilon", c.defer_epsilon},
           {"commit", c.commit},
           {"write_traces", c.write_traces},
           {"memory_cap", c.memory_cap ? json(*c.memory_cap) : json(nullptr)},
           {"threads", c.threads}};
    return j;
}

RunConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig c;
    auto bad = [](const std::string& key, const std::string& value) {
        return ConfigError("invalid value for '" + key + "': " + value);
    };
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "task") {
                auto t = parse_task(v.get<std::string>());
                if (!t) throw bad(key, v.dump());
                c.task = *t;
            } else if (key == "seeds") {
                c.seeds = v.get<std::vector<std::uint64_t>>();
            } else if (key == "frames") {
                c.frames = v.get<std::int64_t>();
            } else if (key == "encoder" || key == "critic") {
                auto b = parse_backend(v.get<std::string>());
                if (!b) throw bad(key, v.dump());
                (key == "encoder" ? c.encoder : c.critic) = *b;
            } else if (key == "explorer") {
                auto e = parse_explorer(v.get<std::string>());
                if (!e) throw bad(key, v.dump());
                c.explorer = *e;
            } else if (key == "gamma") {
                c.gamma = v.get<double>();
            } else if (key == "split") {
                auto s = parse_split(v.get<std::string>());
                if (!s) throw bad(key, v.dump());
                c.split = *s;
            } else if (key == "endpoint") {
                c.endpoint = v.get<std::string>();
            } else if (key == "model") {
                c.model = v.get<std::string>();
            } else if (key == "cache_dir") {
                c.cache_dir = v.get<std::string>();
            } else if (key == "mode") {
                auto m = parse_cache_mode(v.get<std::string>());
                if (!m) throw bad(key, v.dump());
                c.mode = *m;
            } else if (key == "max_in_flight") {
                c.max_in_flight = v.get<int>();
            } else if (key == "memory_in") {
                if (!v.is_null()) c.memory_in = v.get<std::string>();
            } else if (key == "out") {
                c.out = v.get<std::string>();
            } else if (key == "eval_envs") {
                c.eval_envs = v.get<int>();
            } else if (key == "checkpoint_every") {
                c.checkpoint_every = v.get<std::int64_t>();
            } else if (key == "explore_epsilon") {
                c.explore_epsilon = v.get<double>();
            } else if (key == "defer_epsilon") {
                c.defer_epsilon = v.get<double>();
            } else if (key == "commit") {
                c.commit = v.get<bool>();
            } else if (key == "write_traces") {
                c.write_traces = v.get<bool>();
            } else if (key == "memory_cap") {
                if (!v.is_null()) c.memory_cap = v.get<std::size_t>();
            } else if (key == "threads") {
                c.threads = v.get<int>();
            } else {
                throw ConfigError("unknown config key '" + key + "'");
            }
        } catch (const json::exception& e) {
            throw ConfigError("config key '" + key + "': " + e.what());
        }
    }
    return c;
}

std::uint64_t train_env_seed(std::uint64_t run_seed, std::uint64_t episode) {
    return mix64(mix64(run_seed) ^ (episode * 0x9e3779b97f4a7c15ULL)) & ~(1ULL << 63);
}

std::uint64_t eval_env_seed(std::uint64_t index) { return (1ULL << 63) | index; }

// ---------------------------------------------------------------------------
// Episodes
// ---------------------------------------------------------------------------

Backends make_backends(const RunConfig& cfg, LlmClient* client, TranscriptLog* log, bool training) {
    if (cfg.uses_llm() && !client) throw ConfigError("LLM backends selected but no client configured");
    Backends b;
    const TaskSpec spec = TaskSpec::make(cfg.task, cfg.split);
    if (cfg.encoder == Backend::llm)
        b.encoder = std::make_unique<LlmEncoder>(*client, log);
    else
        b.encoder = std::make_unique<OracleEncoder>(spec);
    if (cfg.critic == Backend::llm)
        b.critic = std::make_unique<LlmCritic>(*client, cfg.task, log);
    else
        b.critic = std::make_unique<OracleCritic>();
    if (cfg.explorer == ExplorerKind::llm) {
        b.explorer = std::make_unique<LlmExplorer>(*client, cfg.task, log);
        b.graph = std::make_unique<LlmGraphUpdater>(*client, log);
    } else {
        b.explorer = std::make_unique<ScriptedExplorer>(
            ScriptedExplorerOptions{training ? cfg.explore_epsilon : 0.0});
        b.graph = std::make_unique<OracleGraphUpdater>();
    }
    return b;
}

namespace {

bool target_door_open(const FullState& s) {
    for (const auto& c : s.grid)
        if (c.type == CellType::door && c.color == s.target.color && c.door == DoorState::open) return true;
    return false;
}

}  // namespace

EpisodeResult run_episode(Environment& env, Backends& b, const EpisodicMemory* memory, const EpisodeOptions& opts) {
    EpisodeResult r;
    Observation obs = env.reset();
    const Task task = env.spec().task;
    b.explorer->reset(env.ground_truth());
    r.graph = init_graph();
    History history;
    DecideOptions decide_opts;
    decide_opts.defer_epsilon = opts.defer_epsilon;
    decide_opts.rng = opts.rng;

    bool done = false;
    while (!done && r.steps < opts.frame_limit) {
        const FullState before = env.ground_truth();
        b.explorer->observe(before);

        std::optional<StateKey> key;
        try {
            key = encode(make_encoder_input(obs, task), *b.encoder, before);
        } catch (const EncodeError&) {
            key.reset();
        }

        Decision d = decide({r.steps, obs, key, r.graph, history, before}, memory, *b.critic, *b.explorer, decide_opts);
        const StepResult sr = env.step(d.action);
        const FullState& after = env.ground_truth();

        r.graph = b.graph->update(r.graph, {obs, d.action, sr.observation, before, after});
        if (key) r.buffer.record(canonicalize(*key), d.action, sr.reward);
        if (r.key_pickup_step < 0 && !before.carrying && after.carrying && after.carrying->kind == EntityKind::key)
            r.key_pickup_step = r.steps;
        if (task == Task::UnlockLocal && r.door_open_step < 0 && !target_door_open(before) && target_door_open(after))
            r.door_open_step = r.steps;

        history.push(obs.text(), d.action);
        r.traces.push_back(std::move(d.trace));
        r.total_reward += sr.reward;
        obs = sr.observation;
        done = sr.done;
        r.success = sr.success;
        ++r.steps;
    }
    r.truncated = !done;
    r.buffer.seal();
    return r;
}

void InvocationCounts::add(const DecisionTrace& t) {
    ++steps;
    switch (t.source) {
        case DecisionSource::episodic: ++episodic; break;
        case DecisionSource::llm_policy: ++llm_policy; break;
        case DecisionSource::scripted_policy: ++scripted_policy; break;
    }
}

void InvocationCounts::add(const InvocationCounts& o) {
    steps += o.steps;
    episodic += o.episodic;
    llm_policy += o.llm_policy;
    scripted_policy += o.scripted_policy;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

struct EnvOutcome {
    bool success = false;
    int steps = 0;
    InvocationCounts invocation;
};

EnvOutcome eval_one(const EpisodicMemory& memory, const RunConfig& cfg, const TaskSpec& spec, int index,
                    LlmClient* client) {
    Backends b = make_backends(cfg, client, nullptr, false);
    Environment env(spec, eval_env_seed(static_cast<std::uint64_t>(index)));
    EpisodeResult r = run_episode(env, b, &memory, {});
    EnvOutcome o{r.success, r.steps, {}};
    for (const auto& t : r.traces) o.invocation.add(t);
    return o;
}

EvalResult reduce(const std::vector<EnvOutcome>& outcomes) {
    EvalResult e;
    e.n_envs = static_cast<int>(outcomes.size());
    for (const auto& o : outcomes) {
        e.successes += o.success ? 1 : 0;
        e.frames += o.steps;
        e.invocation.add(o.invocation);
    }
    e.success_rate = static_cast<double>(e.successes) / static_cast<double>(e.n_envs);
    return e;
}

}  // namespace

EvalResult evaluate_serial(const EpisodicMemory& memory, const RunConfig& cfg, Split split, int n_envs,
                           LlmClient* client) {
    if (n_envs < 1) throw UsageError("evaluate needs n_envs >= 1");
    const TaskSpec spec = TaskSpec::make(cfg.task, split);
    std::vector<EnvOutcome> outcomes;
    outcomes.reserve(static_cast<std::size_t>(n_envs));
    for (int i = 0; i < n_envs; ++i) outcomes.push_back(eval_one(memory, cfg, spec, i, client));
    return reduce(outcomes);
}

EvalResult evaluate(const EpisodicMemory& memory, const RunConfig& cfg, Split split, int n_envs, LlmClient* client) {
    if (n_envs < 1) throw UsageError("evaluate needs n_envs >= 1");
    const TaskSpec spec = TaskSpec::make(cfg.task, split);
    std::vector<EnvOutcome> outcomes(static_cast<std::size_t>(n_envs));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_envs));
    const int threads = cfg.threads > 0 ? cfg.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (int i = 0; i < n_envs; ++i) {
        try {
            outcomes[static_cast<std::size_t>(i)] = eval_one(memory, cfg, spec, i, client);
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return reduce(outcomes);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

std::vector<double> RunReport::final_success() const {
    std::vector<double> out;
    for (const auto& s : seeds)
        if (!s.checkpoint_success.empty()) out.push_back(s.checkpoint_success.back());
    return out;
}

InvocationCounts RunReport::invocation() const {
    InvocationCounts total;
    for (const auto& s : seeds) total.add(s.invocation);
    return total;
}

std::pair<double, std::optional<double>> mean_std(const std::vector<double>& v) {
    if (v.empty()) return {0.0, std::nullopt};
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / static_cast<double>(v.size());
    if (v.size() < 2) return {mean, std::nullopt};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

namespace {

std::unique_ptr<LlmClient> make_client(const RunConfig& cfg) {
    if (!cfg.uses_llm()) return nullptr;
    std::unique_ptr<Transport> transport;
    if (!cfg.endpoint.empty()) {
        const char* key = std::getenv("AEC_API_KEY");
        if (!key) key = std::getenv("OPENAI_API_KEY");
        transport = std::make_unique<HttpTransport>(cfg.endpoint, key ? key : "");
    }
    LlmClientConfig lc;
    lc.model = cfg.model;
    lc.cache_dir = cfg.cache_dir;
    lc.mode = cfg.mode;
    lc.max_in_flight = cfg.max_in_flight;
    return std::make_unique<LlmClient>(lc, std::move(transport));
}

/// Fresh memory for the run's task, seeded from `memory_in` when given: a
/// same-task memory is continued as is, anything else is imported.
EpisodicMemory initial_memory(const RunConfig& cfg) {
    EpisodicMemory fresh = EpisodicMemory::create(std::string(to_string(cfg.task)), cfg.gamma, cfg.memory_cap);
    if (!cfg.memory_in) return fresh;
    EpisodicMemory loaded = EpisodicMemory::load(*cfg.memory_in);
    if (loaded.metadata().task == to_string(cfg.task)) {
        if (loaded.metadata().gamma != cfg.gamma)
            throw ConfigError("memory " + cfg.memory_in->string() + " was built with a different gamma");
        return loaded;
    }
    fresh.import_foreign(loaded);
    return fresh;
}

void collect_counters(const Backends& b, BackendCounters& c) {
    c.critic_failures = b.critic->failures();
    if (auto* e = dynamic_cast<const LlmExplorer*>(b.explorer.get())) c.explore_fallbacks = e->fallbacks();
    c.graph_violations = b.graph->violations();
    c.graph_parse_failures = b.graph->parse_failures();
}

/// One training seed. frames == 0 evaluates the initial memory once.
void train_seed(const RunConfig& cfg, SeedRun& run, EpisodicMemory memory, const std::vector<std::int64_t>& checkpoints,
                LlmClient* client, TranscriptLog* log) {
    const TaskSpec train_spec = TaskSpec::make(cfg.task, Split::no_change);
    Backends b = make_backends(cfg, client, log, true);
    Rng rng(mix64(run.seed ^ 0x5eed5eed5eed5eedULL));

    auto checkpoint = [&] {
        const EvalResult e = evaluate(memory, cfg, cfg.split, cfg.eval_envs, client);
        run.checkpoint_success.push_back(e.success_rate);
        run.checkpoint_memory_size.push_back(memory.size());
        run.checkpoint_memory.push_back(memory.serialize());
    };

    std::uint64_t episode = 0;
    for (std::int64_t boundary : checkpoints) {
        while (run.frames < boundary) {
            Environment env(train_spec, train_env_seed(run.seed, episode++));
            EpisodeOptions opts{&rng, cfg.defer_epsilon, static_cast<int>(boundary - run.frames)};
            EpisodeResult r = run_episode(env, b, &memory, opts);
            run.frames += r.steps;
            if (cfg.commit) memory.commit(r.buffer, cfg.gamma);
            for (const auto& t : r.traces) {
                run.invocation.add(t);
                for (const auto& n : t.notes)
                    if (n == "encode_failed") ++run.counters.encode_failures;
            }
            run.episodes.push_back(std::move(r.traces));
        }
        checkpoint();
    }
    const auto encode_failures = run.counters.encode_failures;
    collect_counters(b, run.counters);
    run.counters.encode_failures = encode_failures;
    run.memory = std::move(memory);
}

std::vector<std::int64_t> checkpoint_frames(const RunConfig& cfg) {
    std::vector<std::int64_t> out;
    if (cfg.frames <= 0) return {0};
    for (std::int64_t f = cfg.checkpoint_every; f < cfg.frames; f += cfg.checkpoint_every) out.push_back(f);
    out.push_back(cfg.frames);
    return out;
}

RunReport run_with_memory(const RunConfig& cfg, const EpisodicMemory& start) {
    const auto t0 = std::chrono::steady_clock::now();
    RunReport report;
    report.config = cfg;
    report.checkpoints = checkpoint_frames(cfg);
    auto client = make_client(cfg);
    std::unique_ptr<TranscriptLog> log;
    if (client) log = std::make_unique<TranscriptLog>(cfg.out / "transcripts.jsonl");
    for (std::uint64_t seed : cfg.seeds) {
        report.seeds.emplace_back();
        report.seeds.back().seed = seed;
        try {
            train_seed(cfg, report.seeds.back(), start, report.checkpoints, client.get(), log.get());
        } catch (const Error& e) {
            report.complete = false;
            report.error = "seed " + std::to_string(seed) + ": " + e.what();
            break;
        }
    }
    report.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace

RunReport run_training(const RunConfig& cfg) {
    cfg.validate();
    return run_with_memory(cfg, initial_memory(cfg));
}

TransferReport run_transfer(const RunConfig& cfg, const fs::path& source_memory) {
    RunConfig base = cfg;
    base.memory_in.reset();
    if (base.frames != 0) base.validate();
    else {
        RunConfig probe = base;
        probe.frames = 1;
        probe.validate();
    }
    const EpisodicMemory foreign = EpisodicMemory::load(source_memory);
    EpisodicMemory target = EpisodicMemory::create(std::string(to_string(cfg.task)), cfg.gamma, cfg.memory_cap);
    target.import_foreign(foreign);

    TransferReport t;
    t.target_task = std::string(to_string(cfg.task));
    t.memory_source = foreign.metadata().task;

    RunConfig cold_cfg = base;
    cold_cfg.out = cfg.out / "cold_start";
    t.cold = run_with_memory(cold_cfg, EpisodicMemory::create(t.target_task, cfg.gamma, cfg.memory_cap));
    t.cold.memory_source = "none";

    RunConfig xfer_cfg = base;
    xfer_cfg.out = cfg.out / "transfer";
    xfer_cfg.memory_in = source_memory;
    t.transferred = run_with_memory(xfer_cfg, target);
    t.transferred.memory_source = t.memory_source;
    return t;
}

// ---------------------------------------------------------------------------
// Outputs
// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw Error("cannot write " + path.string());
}

json stat_json(const std::vector<double>& values) {
    const auto [mean, sd] = mean_std(values);
    return {{"per_seed", values}, {"mean", mean}, {"std", sd ? json(*sd) : json("n/a")},
            {"display", fmt(mean) + (sd ? " ± " + fmt(*sd) : std::string(" ± n/a"))}};
}

json invocation_json(const InvocationCounts& c) {
    return {{"decision_steps", c.steps},
            {"episodic", c.episodic},
            {"llm_policy", c.llm_policy},
            {"scripted_policy", c.scripted_policy},
            {"llm_fraction", c.llm_fraction()},
            {"exploration_fraction", c.exploration_fraction()}};
}

}  // namespace

json summary_json(const RunReport& report) {
    const RunConfig& c = report.config;
    json checkpoints = json::array();
    for (std::size_t k = 0; k < report.checkpoints.size(); ++k) {
        std::vector<double> success;
        std::vector<std::size_t> sizes;
        for (const auto& s : report.seeds) {
            if (k < s.checkpoint_success.size()) {
                success.push_back(s.checkpoint_success[k]);
                sizes.push_back(s.checkpoint_memory_size[k]);
            }
        }
        checkpoints.push_back({{"frame", report.checkpoints[k]}, {"success", stat_json(success)}, {"memory_size", sizes}});
    }
    json counters = json::object();
    BackendCounters total;
    std::vector<std::int64_t> frames;
    std::vector<std::size_t> episodes;
    for (const auto& s : report.seeds) {
        total.encode_failures += s.counters.encode_failures;
        total.critic_failures += s.counters.critic_failures;
        total.explore_fallbacks += s.counters.explore_fallbacks;
        total.graph_violations += s.counters.graph_violations;
        total.graph_parse_failures += s.counters.graph_parse_failures;
        frames.push_back(s.frames);
        episodes.push_back(s.episodes.size());
    }
    const std::string task(to_string(c.task));
    const json final_success = stat_json(report.final_success());
    json j{{"format", "aec-summary"},
           {"version", 1},
           {"task", task},
           {"split", to_string(c.split)},
           {"backends", {{"encoder", to_string(c.encoder)}, {"critic", to_string(c.critic)},
                         {"explorer", to_string(c.explorer)}}},
           {"gamma", c.gamma},
           {"frame_budget", c.frames},
           {"seeds", c.seeds},
           {"eval_envs", c.eval_envs},
           {"commit", c.commit},
           {"complete", report.complete},
           {"error", report.error},
           {"final_success", final_success},
           {"table1", {{"method", "AEC"}, {task, final_success["display"]}}},
           {"checkpoints", checkpoints},
           {"invocation", invocation_json(report.invocation())},
           {"frames_per_seed", frames},
           {"episodes_per_seed", episodes},
           {"counters", {{"encode_failures", total.encode_failures},
                         {"critic_failures", total.critic_failures},
                         {"explore_fallbacks", total.explore_fallbacks},
                         {"graph_violations", total.graph_violations},
                         {"graph_parse_failures", total.graph_parse_failures}}},
           {"seed_hygiene", {{"train_env_seeds", "mix64-derived per (run seed, episode), top bit clear"},
                             {"eval_env_seeds", "2^63 + index, top bit set"},
                             {"disjoint", true}}}};
    if (report.memory_source) j["memory_source"] = *report.memory_source;
    return j;
}

void emit_outputs(const RunReport& report, const fs::path& dir) {
    fs::create_directories(dir);
    write_file(dir / "config.json", to_json(report.config).dump(2) + "\n");
    write_file(dir / "summary.json", summary_json(report).dump(2) + "\n");

    std::string curve = "frame";
    for (const auto& s : report.seeds) curve += ",seed_" + std::to_string(s.seed);
    curve += "\n";
    for (std::size_t k = 0; k < report.checkpoints.size(); ++k) {
        curve += std::to_string(report.checkpoints[k]);
        for (const auto& s : report.seeds)
            curve += "," + (k < s.checkpoint_success.size() ? fmt(s.checkpoint_success[k]) : std::string());
        curve += "\n";
    }
    write_file(dir / "learning_curve.csv", curve);

    std::string inv = "seed,decision_steps,episodic,llm_policy,scripted_policy,llm_fraction,exploration_fraction\n";
    auto inv_row = [&](const std::string& label, const InvocationCounts& c) {
        inv += label + "," + std::to_string(c.steps) + "," + std::to_string(c.episodic) + "," +
               std::to_string(c.llm_policy) + "," + std::to_string(c.scripted_policy) + "," + fmt(c.llm_fraction()) +
               "," + fmt(c.exploration_fraction()) + "\n";
    };
    for (const auto& s : report.seeds) inv_row(std::to_string(s.seed), s.invocation);
    inv_row("all", report.invocation());
    write_file(dir / "invocation_rate.csv", inv);

    json timing{{"wall_clock_s", report.wall_clock_s}};
    write_file(dir / "timing.json", timing.dump(2) + "\n");

    for (const auto& s : report.seeds) {
        const fs::path seed_dir = "seed_" + std::to_string(s.seed);
        if (report.config.write_traces) {
            const fs::path tdir = dir / "traces" / seed_dir;
            fs::remove_all(tdir);
            fs::create_directories(tdir);
            for (std::size_t e = 0; e < s.episodes.size(); ++e) {
                std::string text;
                for (const auto& t : s.episodes[e]) text += to_json(t).dump() + "\n";
                write_file(tdir / ("episode_" + std::to_string(e) + ".jsonl"), text);
            }
        }
        const fs::path mdir = dir / "memory" / seed_dir;
        for (std::size_t k = 0; k < s.checkpoint_memory.size() && k < report.checkpoints.size(); ++k)
            write_file(mdir / ("frame_" + std::to_string(report.checkpoints[k]) + ".jsonl"), s.checkpoint_memory[k]);
        if (s.memory) write_file(mdir / "final.jsonl", s.memory->serialize());
    }
}

void emit_transfer(const TransferReport& report, const fs::path& dir) {
    emit_outputs(report.cold, dir / "cold_start");
    emit_outputs(report.transferred, dir / "transfer");
    auto row = [](const std::string& source, const RunReport& r) {
        const json s = stat_json(r.final_success());
        return json{{"memory_source", source}, {"success", s}};
    };
    const json table2{{"format", "aec-transfer"},
                      {"version", 1},
                      {"target_task", report.target_task},
                      {"memory_source", report.memory_source},
                      {"rows", json::array({row("None (cold start)", report.cold),
                                            row(report.memory_source, report.transferred)})}};
    write_file(dir / "transfer.json", table2.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

std::vector<std::vector<std::vector<DecisionTrace>>> load_traces(const fs::path& run_dir) {
    std::vector<std::vector<std::vector<DecisionTrace>>> out;
    const fs::path root = run_dir / "traces";
    if (!fs::exists(root)) return out;
    std::vector<std::pair<std::uint64_t, fs::path>> seed_dirs;
    for (const auto& e : fs::directory_iterator(root)) {
        const std::string name = e.path().filename().string();
        if (e.is_directory() && name.rfind("seed_", 0) == 0) seed_dirs.emplace_back(std::stoull(name.substr(5)), e.path());
    }
    std::sort(seed_dirs.begin(), seed_dirs.end());
    for (const auto& [seed, path] : seed_dirs) {
        std::vector<std::pair<std::size_t, fs::path>> files;
        for (const auto& e : fs::directory_iterator(path)) {
            const std::string name = e.path().stem().string();
            if (name.rfind("episode_", 0) == 0) files.emplace_back(std::stoull(name.substr(8)), e.path());
        }
        std::sort(files.begin(), files.end());
        auto& episodes = out.emplace_back();
        for (const auto& [idx, file] : files) {
            std::ifstream in(file);
            auto& steps = episodes.emplace_back();
            for (std::string line; std::getline(in, line);)
                if (!line.empty()) steps.push_back(trace_from_json(json::parse(line)));
        }
    }
    return out;
}

ReplayResult replay(const fs::path& run_dir, const fs::path& out) {
    std::ifstream in(run_dir / "config.json");
    if (!in) throw ConfigError("no config.json in " + run_dir.string());
    RunConfig cfg = config_from_json(json::parse(in));
    cfg.mode = CacheMode::cache_only;
    cfg.endpoint.clear();
    cfg.out = out;
    cfg.write_traces = true;

    ReplayResult result;
    result.report = run_training(cfg);
    emit_outputs(result.report, out);

    const auto original = load_traces(run_dir);
    const auto replayed = load_traces(out);
    result.traces_identical = original.size() == replayed.size();
    for (std::size_t s = 0; result.traces_identical && s < original.size(); ++s) {
        if (original[s].size() != replayed[s].size()) {
            result.traces_identical = false;
            result.first_mismatch = "seed index " + std::to_string(s) + ": episode count differs";
            break;
        }
        for (std::size_t e = 0; result.traces_identical && e < original[s].size(); ++e) {
            const auto& a = original[s][e];
            const auto& b = replayed[s][e];
            for (std::size_t t = 0; t < std::max(a.size(), b.size()); ++t) {
                if (t >= a.size() || t >= b.size() || !a[t].same_decision(b[t])) {
                    result.traces_identical = false;
                    result.first_mismatch = "seed index " + std::to_string(s) + ", episode " + std::to_string(e) +
                                            ", step " + std::to_string(t);
                    break;
                }
            }
        }
    }
    if (original.empty() && result.first_mismatch.empty()) {
        result.traces_identical = false;
        result.first_mismatch = "recorded run has no traces";
    }

    std::ifstream sin(run_dir / "summary.json");
    if (sin) {
        const json recorded = json::parse(sin);
        result.metrics_identical = recorded == summary_json(result.report);
        if (!result.metrics_identical && result.first_mismatch.empty()) result.first_mismatch = "summary differs";
    } else if (result.first_mismatch.empty()) {
        result.first_mismatch = "recorded run has no summary.json";
    }
    const json verdict{{"traces_identical", result.traces_identical},
                       {"metrics_identical", result.metrics_identical},
                       {"first_mismatch", result.first_mismatch}};
    write_file(out / "replay.json", verdict.dump(2) + "\n");
    return result;
}

}  // namespace aec
