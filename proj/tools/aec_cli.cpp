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

// aec: train / eval / transfer / replay front end.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "aec/harness.hpp"

namespace {

void print_summary(const aec::RunReport& r, const std::filesystem::path& out) {
    const auto s = aec::summary_json(r);
    std::cout << s["task"].get<std::string>() << " (" << s["split"].get<std::string>()
              << "): final success " << s["final_success"]["display"].get<std::string>() << ", exploration fraction "
              << s["invocation"]["exploration_fraction"].get<double>() << ", outputs in " << out.string() << "\n";
    if (!r.complete) std::cerr << "run incomplete: " << r.error << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    using namespace aec;
    CLI::App app{"Episodic control agent for text gridworlds"};
    app.set_config("--config", "", "TOML key = value file mirroring the long flags; flags override it");
    app.require_subcommand(1);

    RunConfig cfg;
    std::string memory_in;
    std::string out = cfg.out.string();
    std::string cache_dir = cfg.cache_dir.string();
    std::size_t memory_cap = 0;
    bool no_commit = false;
    bool no_traces = false;

    std::string task = "GoToLocal", encoder = "oracle", critic = "oracle", explorer = "scripted";
    std::string split = "no_change", mode = "online";
    app.add_option("--task", task, "GoToLocal, PickupLocal, UnlockLocal or FindObj");
    app.add_option("--seed", cfg.seeds, "run seeds (repeat or comma-separate)")->delimiter(',');
    app.add_option("--frames", cfg.frames, "environment steps per seed");
    app.add_option("--encoder", encoder, "oracle or llm");
    app.add_option("--critic", critic, "oracle or llm");
    app.add_option("--explorer", explorer, "scripted or llm");
    app.add_option("--gamma", cfg.gamma, "discount factor");
    app.add_option("--split", split, "no_change or new_object");
    app.add_option("--endpoint", cfg.endpoint, "OpenAI-compatible base URL, e.g. http://localhost:8000/v1");
    app.add_option("--model", cfg.model, "model name sent to the endpoint");
    app.add_option("--cache-dir", cache_dir, "LLM response cache directory");
    app.add_option("--mode", mode, "online or cache-only");
    app.add_option("--memory-in", memory_in, "episodic memory file to start from (transfer: the source memory)");
    app.add_option("--out", out, "output directory");
    app.add_option("--eval-envs", cfg.eval_envs, "evaluation environments per checkpoint");
    app.add_option("--checkpoint-every", cfg.checkpoint_every, "frames between evaluations");
    app.add_option("--explore-epsilon", cfg.explore_epsilon, "random-action rate of the scripted explorer in training");
    app.add_option("--defer-epsilon", cfg.defer_epsilon, "chance a critical memory hit explores instead, in training");
    app.add_option("--memory-cap", memory_cap, "maximum memory entries (0 = unbounded)");
    app.add_option("--max-in-flight", cfg.max_in_flight, "concurrent LLM requests");
    app.add_option("--threads", cfg.threads, "OpenMP threads for evaluation (0 = default)");
    app.add_flag("--no-commit", no_commit, "never write episodic memory (ablation)");
    app.add_flag("--no-traces", no_traces, "skip per-episode trace files");

    auto* train = app.add_subcommand("train", "train and evaluate at checkpoints");
    auto* eval = app.add_subcommand("eval", "evaluate a memory file (or an empty memory)");
    auto* transfer = app.add_subcommand("transfer", "evaluate or continue with a memory from another task");
    auto* replay_cmd = app.add_subcommand("replay", "re-run a recorded run from the response cache and compare");
    std::string run_dir;
    replay_cmd->add_option("run_dir", run_dir, "directory of the recorded run")->required();
    for (auto* sub : {train, eval, transfer, replay_cmd}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    auto parsed = [](auto value, const char* flag, const std::string& text) {
        if (!value) {
            std::cerr << "invalid value for " << flag << ": " << text << "\n";
            std::exit(2);
        }
        return *value;
    };
    cfg.task = parsed(parse_task(task), "--task", task);
    cfg.encoder = parsed(parse_backend(encoder), "--encoder", encoder);
    cfg.critic = parsed(parse_backend(critic), "--critic", critic);
    cfg.explorer = parsed(parse_explorer(explorer), "--explorer", explorer);
    cfg.split = parsed(parse_split(split), "--split", split);
    cfg.mode = parsed(parse_cache_mode(mode), "--mode", mode);
    cfg.out = out;
    cfg.cache_dir = cache_dir;
    if (!memory_in.empty()) cfg.memory_in = memory_in;
    if (memory_cap > 0) cfg.memory_cap = memory_cap;
    cfg.commit = !no_commit;
    cfg.write_traces = !no_traces;

    try {
        if (*train) {
            const RunReport r = run_training(cfg);
            emit_outputs(r, cfg.out);
            print_summary(r, cfg.out);
            return r.complete ? 0 : 3;
        }
        if (*eval) {
            RunConfig probe = cfg;
            probe.frames = 1;
            probe.validate();
            EpisodicMemory memory = cfg.memory_in ? EpisodicMemory::load(*cfg.memory_in)
                                                  : EpisodicMemory::create(std::string(to_string(cfg.task)), cfg.gamma);
            std::unique_ptr<LlmClient> client;
            if (cfg.uses_llm()) {
                LlmClientConfig lc;
                lc.model = cfg.model;
                lc.cache_dir = cfg.cache_dir;
                lc.mode = cfg.mode;
                lc.max_in_flight = cfg.max_in_flight;
                std::unique_ptr<Transport> transport;
                if (!cfg.endpoint.empty()) {
                    const char* key = std::getenv("AEC_API_KEY");
                    transport = std::make_unique<HttpTransport>(cfg.endpoint, key ? key : "");
                }
                client = std::make_unique<LlmClient>(lc, std::move(transport));
            }
            const EvalResult e = evaluate(memory, cfg, cfg.split, cfg.eval_envs, client.get());
            const nlohmann::json j{{"task", to_string(cfg.task)},
                                   {"split", to_string(cfg.split)},
                                   {"memory", cfg.memory_in ? cfg.memory_in->string() : std::string("(empty)")},
                                   {"n_envs", e.n_envs},
                                   {"successes", e.successes},
                                   {"success_rate", e.success_rate},
                                   {"frames", e.frames},
                                   {"exploration_fraction", e.invocation.exploration_fraction()},
                                   {"llm_fraction", e.invocation.llm_fraction()}};
            std::filesystem::create_directories(cfg.out);
            std::ofstream(cfg.out / "eval.json") << j.dump(2) << "\n";
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        if (*transfer) {
            if (!cfg.memory_in) throw ConfigError("transfer needs --memory-in with the source memory");
            const TransferReport t = run_transfer(cfg, *cfg.memory_in);
            emit_transfer(t, cfg.out);
            const auto cold = mean_std(t.cold.final_success()).first;
            const auto xfer = mean_std(t.transferred.final_success()).first;
            std::cout << t.target_task << ": cold start " << cold << ", with " << t.memory_source << " memory " << xfer
                      << ", report in " << (cfg.out / "transfer.json").string() << "\n";
            return t.cold.complete && t.transferred.complete ? 0 : 3;
        }
        if (*replay_cmd) {
            const std::filesystem::path dest = out == RunConfig{}.out.string() ? std::filesystem::path(run_dir) / "replay"
                                                                               : std::filesystem::path(out);
            const ReplayResult r = replay(run_dir, dest);
            std::cout << "traces identical: " << (r.traces_identical ? "yes" : "no")
                      << ", metrics identical: " << (r.metrics_identical ? "yes" : "no");
            if (!r.first_mismatch.empty()) std::cout << " (first mismatch: " << r.first_mismatch << ")";
            std::cout << "\n";
            return r.traces_identical && r.metrics_identical ? 0 : 1;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
