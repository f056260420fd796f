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


// Acceptance gate: one PASS/FAIL line per criterion. Exit status is the
// number of failures, so ctest goes red whenever one of them does.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "aec/harness.hpp"
#include "support/mock_openai.hpp"
#include "support/oracles.hpp"
#include "support/scenes.hpp"

using namespace aec;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(const char* name, const std::function<Verdict()>& body, double time_limit_s = 0.0) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (time_limit_s > 0 && secs > time_limit_s) {
        v.pass = false;
        v.detail += " (over the " + std::to_string(static_cast<int>(time_limit_s)) + " s budget)";
    }
    failures += !v.pass;
    std::printf("%s  %-28s %s  [%.1f s]\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", x);
    return buf;
}

fs::path work_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "aec_acceptance" / name;
    fs::remove_all(dir);
    return dir;
}

CanonicalKey key_n(std::uint64_t i) {
    StateKey k;
    for (; i > 0; i = (i - 1) / 5) k.target_directions.emplace_back(kDirectionPhrases[(i - 1) % 5]);
    return canonicalize(k);
}

EpisodeBuffer random_buffer(Rng& rng, std::uint64_t key_space, int max_len, std::vector<double>* rewards = nullptr) {
    EpisodeBuffer b;
    const int n = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_len)));
    for (int t = 0; t < n; ++t) {
        const double r = rng.chance(0.2) ? rng.unit() : 0.0;
        if (rewards) rewards->push_back(r);
        b.record(key_n(rng.below(key_space)), kAllActions[rng.below(kNumActions)], r);
    }
    b.seal();
    return b;
}

RunConfig oracle_config(Task task, const std::string& name) {
    RunConfig c;
    c.task = task;
    c.out = work_dir(name);
    c.write_traces = false;
    return c;
}

double mean(const std::vector<double>& v) { return mean_std(v).first; }

}  // namespace

int main() {
    std::printf("AEC acceptance gate\n");

    criterion("memory-monotonicity", [] {
        Rng rng(1);
        for (int seq = 0; seq < 10'000; ++seq) {
            EpisodicMemory m = EpisodicMemory::create("GoToLocal", 0.9);
            const int commits = 1 + static_cast<int>(rng.below(4));
            for (int c = 0; c < commits; ++c) {
                const auto before = m.entries();
                const EpisodeBuffer b = random_buffer(rng, 40, 12);
                m.commit(b, 0.9);
                for (const auto& e : before) {
                    const auto now = m.lookup(e.key);
                    if (!now) return Verdict{false, "key vanished in sequence " + std::to_string(seq)};
                    for (Action a : kAllActions)
                        if (e.value(a) && (!now->value(a) || *now->value(a) < *e.value(a)))
                            return Verdict{false, "value decreased in sequence " + std::to_string(seq)};
                }
                const std::string once = m.serialize();
                m.commit(b, 0.9);
                if (m.serialize() != once) return Verdict{false, "recommit changed bytes in sequence " + std::to_string(seq)};
            }
        }
        return Verdict{true, "10000 sequences, no decrease, recommit byte-identical"};
    }, 30.0);

    criterion("return-oracle", [] {
        Rng rng(2);
        double worst = 0.0;
        for (int ep = 0; ep < 1000; ++ep) {
            const double gamma = std::array{0.5, 0.9, 0.99, 1.0}[static_cast<std::size_t>(ep % 4)];
            std::vector<double> rewards;
            const EpisodeBuffer b = random_buffer(rng, 10, 50, &rewards);
            const auto got = compute_returns(b, gamma);
            const auto want = oracle::forward_returns(rewards, gamma);
            if (got.size() != want.size()) return Verdict{false, "length mismatch"};
            for (std::size_t t = 0; t < got.size(); ++t) worst = std::max(worst, std::abs(got[t].value - want[t]));
        }
        char buf[64];
        std::snprintf(buf, sizeof buf, "1000 episodes, max |error| = %.2e", worst);
        return Verdict{worst <= 1e-12, buf};
    });

    criterion("lookup-vs-linear-scan", [] {
        Rng rng(3);
        std::int64_t probes = 0;
        for (int i = 0; i < 1000; ++i) {
            EpisodicMemory m = EpisodicMemory::create("GoToLocal", 0.99);
            oracle::LinearMemory lin;
            for (int c = static_cast<int>(rng.below(6)); c > 0; --c) {
                const EpisodeBuffer b = random_buffer(rng, 30, 10);
                m.commit(b, 0.99);
                for (const auto& r : compute_returns(b, 0.99)) lin.commit_max(r.key.value, r.action, r.value);
            }
            for (std::uint64_t k = 0; k < 35; ++k, ++probes) {
                const CanonicalKey key = key_n(k);
                const auto e = m.lookup(key);
                if (e.has_value() != lin.has_key(key.value)) return Verdict{false, "presence differs"};
                for (Action a : kAllActions) {
                    const auto v = e ? e->value(a) : std::nullopt;
                    if (v != lin.value(key.value, a)) return Verdict{false, "value differs"};
                }
                if (m.best_action(key) != lin.best(key.value)) return Verdict{false, "best_action differs"};
            }
        }
        return Verdict{true, "1000 memories, " + std::to_string(probes) + " probes agree"};
    });

    criterion("retain-all", [] {
        Rng rng(4);
        std::int64_t accepted = 0;
        int repaired = 0, mutated = 0;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            TaskSpec spec = TaskSpec::make(Task::FindObj);
            spec.max_steps = 1000;
            Environment env(spec, seed);
            WorldGraph g = init_graph();
            for (int step = 0; step < 1000 && !env.ground_truth().done; ++step) {
                const FullState before = env.ground_truth();
                // No pick_up: picking the target would end the walk early.
                const std::array<Action, 6> choices{Action::go_forward, Action::go_forward, Action::go_forward,
                                                    Action::toggle,     Action::turn_left,  Action::turn_right};
                const Action a = choices[rng.below(choices.size())];
                env.step(a);
                const WorldGraph next = oracle_update(g, before, a, env.ground_truth());
                if (!retains_all(g, next)) return Verdict{false, "seed " + std::to_string(seed) + " lost an item"};
                g = next;
                ++accepted;
            }
            // Adversarial replies built from this walk's graph: drop lines at random.
            for (int k = 0; k < 5; ++k) {
                std::vector<std::string> lines;
                std::istringstream in(serialize(g));
                for (std::string l; std::getline(in, l);) lines.push_back(l);
                if (lines.size() < 2) continue;
                lines.erase(lines.begin() + 1 + static_cast<long>(rng.below(lines.size() - 1)));
                std::string text;
                for (const auto& l : lines) text += l + "\n";
                const auto r = parse_graph_output(text, g);
                ++mutated;
                if (!retains_all(g, r.graph)) return Verdict{false, "repair failed"};
                repaired += r.violations > 0;
            }
        }
        return Verdict{repaired > 0, std::to_string(accepted) + " accepted updates; repair exercised on " +
                                         std::to_string(repaired) + "/" + std::to_string(mutated) + " mutated replies"};
    });

    criterion("distance-invariance", [] {
        Rng rng(5);
        const TaskSpec spec{};
        for (int i = 0; i < 500; ++i) {
            const auto [near, far] = scenes::distance_pair(rng);
            const auto a = canonicalize(oracle_encode(near, spec)), b = canonicalize(oracle_encode(far, spec));
            if (a != b) return Verdict{false, "pair " + std::to_string(i) + ": " + a.value + " vs " + b.value};
        }
        return Verdict{true, "500 pairs, equal keys"};
    });

    // Shared by the gating and invocation-rate criteria.
    RunConfig go = oracle_config(Task::GoToLocal, "gating");
    go.seeds = {0};
    const RunReport trained = run_training(go);

    criterion("gating-soundness", [&] {
        const EpisodicMemory& memory = *trained.seeds[0].memory;
        if (memory.size() == 0) return Verdict{false, "trained memory is empty"};
        std::int64_t steps = 0, critical = 0, episodic = 0;
        for (int i = 0; i < 100; ++i) {
            Environment env(TaskSpec::make(Task::GoToLocal), eval_env_seed(static_cast<std::uint64_t>(i)));
            Backends b = make_backends(go, nullptr, nullptr, false);
            Observation obs = env.reset();
            b.explorer->reset(env.ground_truth());
            WorldGraph graph = init_graph();
            History history;
            for (bool done = false; !done;) {
                const FullState before = env.ground_truth();
                b.explorer->observe(before);
                const auto key = encode(make_encoder_input(obs, Task::GoToLocal), *b.encoder, before);
                const std::uint64_t lookups = memory.lookup_count();
                const Decision d = decide({static_cast<int>(steps), obs, key, graph, history, before}, &memory,
                                          *b.critic, *b.explorer);
                const std::uint64_t used = memory.lookup_count() - lookups;
                if (!d.trace.critical && used != 0) return Verdict{false, "lookup at a non-critical step"};
                if (d.trace.source == DecisionSource::episodic && !d.trace.critical)
                    return Verdict{false, "episodic decision at a non-critical step"};
                critical += d.trace.critical;
                episodic += d.trace.source == DecisionSource::episodic;
                const StepResult sr = env.step(d.action);
                graph = b.graph->update(graph, {obs, d.action, sr.observation, before, env.ground_truth()});
                history.push(obs.text(), d.action);
                obs = sr.observation;
                done = sr.done;
                ++steps;
            }
        }
        return Verdict{episodic > 0, std::to_string(steps) + " steps, " + std::to_string(critical) + " critical, " +
                                         std::to_string(episodic) + " episodic, all at critical steps"};
    });

    criterion("learning-effect", [] {
        RunConfig c = oracle_config(Task::GoToLocal, "learning");
        const RunReport with = run_training(c);
        c.commit = false;
        c.out = work_dir("learning_ablated");
        const RunReport without = run_training(c);
        const double a = mean(with.final_success()), b = mean(without.final_success());
        return Verdict{a >= 0.70 && a - b >= 0.10,
                       "GoToLocal 3 seeds x 25K frames: memory " + fmt(a) + ", ablated " + fmt(b)};
    }, 300.0);

    criterion("unlock-key-before-door", [] {
        RunConfig c = oracle_config(Task::UnlockLocal, "unlock");
        const RunReport r = run_training(c);
        int successes = 0, ordered = 0;
        for (const auto& seed : r.seeds) {
            for (int i = 0; i < 100; ++i) {
                Environment env(TaskSpec::make(Task::UnlockLocal), eval_env_seed(static_cast<std::uint64_t>(i)));
                Backends b = make_backends(c, nullptr, nullptr, false);
                const EpisodeResult e = run_episode(env, b, &*seed.memory, {});
                if (!e.success) continue;
                ++successes;
                ordered += e.key_pickup_step >= 0 && e.door_open_step >= 0 && e.key_pickup_step < e.door_open_step;
            }
        }
        const double frac = successes ? static_cast<double>(ordered) / successes : 0.0;
        return Verdict{successes > 0 && frac >= 0.95, std::to_string(ordered) + "/" + std::to_string(successes) +
                                                          " successes pick up the key first (" + fmt(frac) + ")"};
    });

    criterion("transfer-direction", [] {
        RunConfig src = oracle_config(Task::PickupLocal, "transfer_src");
        src.seeds = {0};
        const RunReport pickup = run_training(src);
        const fs::path mem = src.out / "pickup.jsonl";
        fs::create_directories(src.out);
        pickup.seeds[0].memory->save(mem);

        RunConfig c = oracle_config(Task::GoToLocal, "transfer");
        c.frames = 0;
        const TransferReport t = run_transfer(c, mem);
        emit_transfer(t, c.out);
        std::ifstream in(c.out / "transfer.json");
        const auto table = nlohmann::json::parse(in);
        const bool shaped = table["rows"].size() == 2 && table["rows"][0]["memory_source"] == "None (cold start)" &&
                            table["rows"][1]["memory_source"] == "PickupLocal";
        const double cold = mean(t.cold.final_success()), xfer = mean(t.transferred.final_success());
        return Verdict{shaped && xfer >= cold, "GoToLocal cold " + fmt(cold) + ", with PickupLocal memory " +
                                                   fmt(xfer) + (shaped ? "; table written" : "; table malformed")};
    });

    criterion("replay-fidelity", [] {
        testing::MockOpenAi server;
        RunConfig c;
        c.seeds = {0};
        c.frames = 200;
        c.checkpoint_every = 200;
        c.eval_envs = 3;
        c.encoder = Backend::llm;
        c.critic = Backend::llm;
        c.explorer = ExplorerKind::llm;
        c.endpoint = server.endpoint();
        c.cache_dir = work_dir("replay_cache");
        c.out = work_dir("replay_run");
        const RunReport r = run_training(c);
        if (!r.complete) return Verdict{false, "online run failed: " + r.error};
        emit_outputs(r, c.out);
        const int online = server.requests();
        const ReplayResult rep = replay(c.out, c.out / "replay");
        const bool offline = server.requests() == online;
        return Verdict{rep.traces_identical && rep.metrics_identical && offline,
                       std::to_string(online) + " requests online, " +
                           (offline ? "none" : std::to_string(server.requests() - online)) + " on replay; traces " +
                           (rep.traces_identical ? "identical" : "differ at " + rep.first_mismatch) + ", metrics " +
                           (rep.metrics_identical ? "identical" : "differ")};
    });

    criterion("invocation-rate", [&] {
        const EpisodicMemory empty = EpisodicMemory::create("GoToLocal", go.gamma);
        const EvalResult cold = evaluate(empty, go, Split::no_change, 100);
        const EvalResult full = evaluate(*trained.seeds[0].memory, go, Split::no_change, 100);
        const double a = cold.invocation.exploration_fraction(), b = full.invocation.exploration_fraction();
        return Verdict{b < a, "exploration fraction cold " + fmt(a) + ", pre-seeded " + fmt(b)};
    });

    std::printf("%d failing\n", failures);
    return failures;
}
