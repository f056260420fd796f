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

#include <filesystem>

#include "aec/controller.hpp"
#include "aec/llm_client.hpp"
#include "support/fake_transport.hpp"
#include "support/oracles.hpp"
#include "support/scenes.hpp"

using namespace aec;
using scenes::make_scene;
using testing::completion_body;
using testing::FakeTransport;

namespace {

const ObjectDesc kRedBall{Color::red, EntityKind::ball};

StateKey key_with(std::vector<std::string> dirs) {
    StateKey k;
    k.target_directions = std::move(dirs);
    return k;
}

/// Client whose replies come from a list, repeating the last one.
std::unique_ptr<LlmClient> scripted_client(const std::string& name, std::vector<std::string> replies,
                                           FakeTransport** out = nullptr) {
    auto t = std::make_unique<FakeTransport>();
    auto shared = std::make_shared<std::vector<std::string>>(std::move(replies));
    auto next = std::make_shared<std::size_t>(0);
    t->reply = [shared, next](const std::string&) {
        const std::string r = (*shared)[std::min(*next, shared->size() - 1)];
        ++*next;
        return completion_body(r);
    };
    if (out) *out = t.get();
    LlmClientConfig cfg;
    cfg.cache_dir = std::filesystem::temp_directory_path() / "aec_tests" / name;
    std::filesystem::remove_all(cfg.cache_dir);
    return std::make_unique<LlmClient>(cfg, std::move(t));
}

EpisodicMemory memory_with(const CanonicalKey& key, std::vector<std::pair<Action, double>> values) {
    EpisodicMemory m = EpisodicMemory::create("GoToLocal", 1.0);
    for (const auto& [a, v] : values) {
        EpisodeBuffer b;
        b.record(key, a, v);
        b.seal();
        m.commit(b, 1.0);
    }
    return m;
}

/// A corridor one cell wide running north from the agent.
FullState corridor() {
    std::vector<scenes::Placement> walls;
    for (int fwd = 0; fwd <= 6; ++fwd)
        for (int lat : {-3, -2, -1, 1, 2, 3}) walls.push_back({lat, fwd, Cell::wall()});
    return make_scene(walls, kRedBall);
}

}  // namespace

TEST_SUITE("controller") {

TEST_CASE("oracle criticality is a nonempty target list") {
    OracleCritic critic;
    CHECK(is_critical(key_with({"left"}), "go to the red ball", critic));
    CHECK_FALSE(is_critical(key_with({}), "go to the red ball", critic));
}

TEST_CASE("critic replies are parsed strictly") {
    CHECK(parse_critic_reply("yes") == true);
    CHECK(parse_critic_reply(" No. ") == false);
    CHECK(parse_critic_reply("\"YES\"") == true);
    CHECK_FALSE(parse_critic_reply("yes, the target is left").has_value());
    CHECK_FALSE(parse_critic_reply("maybe").has_value());
}

TEST_CASE("LLM critic agrees with the oracle on well-formed replies and counts failures") {
    auto yes = scripted_client("critic_yes", {"Yes"});
    LlmCritic a(*yes, Task::GoToLocal);
    CHECK(a.is_critical(key_with({"left"}), "go to the red ball"));
    CHECK(a.disagreements() == 0);

    FakeTransport* fake = nullptr;
    auto junk = scripted_client("critic_junk", {"I believe so", "perhaps", "who knows"}, &fake);
    LlmCritic b(*junk, Task::GoToLocal);
    CHECK_FALSE(b.is_critical(key_with({"left"}), "go to the red ball"));
    CHECK(b.failures() == 1);
    CHECK(fake->calls == 3);  // first try plus two re-prompts

    const std::string p = build_critic_prompt(Task::GoToLocal, "go to the red ball", key_with({"right"}));
    CHECK(p.find("determine if there is a target direction") != std::string::npos);
    CHECK(p.find("target right") != std::string::npos);
}

TEST_CASE("exploit returns the stored argmax or nothing") {
    const CanonicalKey k = canonicalize(key_with({"forward"}));
    const EpisodicMemory m = memory_with(k, {{Action::toggle, 0.95}});
    CHECK(exploit(m, k) == Action::toggle);
    CHECK_FALSE(exploit(m, canonicalize(key_with({"left"}))).has_value());

    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        std::vector<std::pair<Action, double>> vals;
        oracle::LinearMemory lin;
        for (Action a : kAllActions)
            if (rng.chance(0.6)) {
                const double v = static_cast<double>(rng.below(5)) / 4.0;
                vals.push_back({a, v});
                lin.commit_max(k.value, a, v);
            }
        const EpisodicMemory mm = memory_with(k, vals);
        const auto want = lin.best(k.value);
        CHECK(exploit(mm, k) == (want ? std::optional<Action>(want->first) : std::nullopt));
    }
}

TEST_CASE("decide gates memory on criticality") {
    const FullState s = make_scene({{-2, 3, Cell::object(kRedBall)}}, kRedBall);
    const Observation obs = render_observation(s);
    const std::optional<StateKey> key = oracle_encode(s, {});
    REQUIRE(oracle_is_critical(*key));
    const WorldGraph g = init_graph();
    History h;
    OracleCritic critic;
    ScriptedExplorer explorer;
    explorer.reset(s);
    explorer.observe(s);

    const EpisodicMemory hit = memory_with(canonicalize(*key), {{Action::turn_left, 0.9}});
    Decision d = decide({0, obs, key, g, h, s}, &hit, critic, explorer);
    CHECK(d.trace.source == DecisionSource::episodic);
    CHECK(d.trace.mode == Mode::exploit);
    CHECK(d.trace.critical);
    CHECK(d.action == Action::turn_left);

    const EpisodicMemory miss = memory_with(canonicalize(key_with({"right"})), {{Action::go_forward, 0.9}});
    d = decide({0, obs, key, g, h, s}, &miss, critic, explorer);
    CHECK(d.trace.source == DecisionSource::scripted_policy);
    CHECK(d.trace.critical);

    // Non-critical step: memory is never consulted.
    const FullState empty = make_scene({}, kRedBall);
    const std::optional<StateKey> none = oracle_encode(empty, {});
    EpisodicMemory full = memory_with(canonicalize(*none), {{Action::go_forward, 1.0}});
    full.reset_lookup_count();
    const Observation eobs = render_observation(empty);
    d = decide({0, eobs, none, g, h, empty}, &full, critic, explorer);
    CHECK_FALSE(d.trace.critical);
    CHECK(d.trace.source != DecisionSource::episodic);
    CHECK(full.lookup_count() == 0);

    // Encoder failure explores and is noted.
    const std::optional<StateKey> failed;
    d = decide({0, obs, failed, g, h, s}, &hit, critic, explorer);
    CHECK(d.trace.source == DecisionSource::scripted_policy);
    CHECK(d.trace.notes == std::vector<std::string>{"encode_failed"});
}

TEST_CASE("loop guard skips an action already taken from the same observation") {
    const FullState s = make_scene({{-2, 3, Cell::object(kRedBall)}}, kRedBall);
    const Observation obs = render_observation(s);
    const std::optional<StateKey> key = oracle_encode(s, {});
    const EpisodicMemory hit = memory_with(canonicalize(*key), {{Action::turn_left, 0.9}});
    OracleCritic critic;
    ScriptedExplorer explorer;
    explorer.reset(s);
    explorer.observe(s);
    History h;
    h.push(obs.text(), Action::turn_left);
    const Decision d = decide({1, obs, key, init_graph(), h, s}, &hit, critic, explorer);
    CHECK(d.trace.source == DecisionSource::scripted_policy);
    CHECK(d.trace.critical);
    CHECK(std::find(d.trace.notes.begin(), d.trace.notes.end(), "loop_guard") != d.trace.notes.end());
}

TEST_CASE("history window renders the newest pairs and counts the whole episode") {
    History h(2);
    CHECK(h.render() == "(none)");
    h.push("obs one", Action::go_forward);
    h.push("obs two", Action::turn_left);
    h.push("obs three", Action::toggle);
    CHECK(h.size() == 2);
    const std::string r = h.render();
    CHECK(r.find("obs one") == std::string::npos);
    CHECK(r.find("obs three") != std::string::npos);
    CHECK(r.find("obs two") < r.find("obs three"));
    CHECK(h.count("obs one", Action::go_forward) == 1);
    CHECK(h.last_action() == Action::toggle);
}

TEST_CASE("scripted explorer rules") {
    SUBCASE("open unvisited cell ahead: go forward") {
        FullState s = corridor();
        ScriptedExplorer e;
        e.reset(s);
        FullState back = s;
        back.dir = Direction::south;
        e.observe(back);
        e.observe(s);
        CHECK(e.plan(s) == Action::go_forward);
    }
    SUBCASE("key ahead in the unlock task: pick it up") {
        const FullState s = make_scene({{0, 1, Cell::object({Color::red, EntityKind::key})}},
                                       {Color::red, EntityKind::door}, std::nullopt, Task::UnlockLocal);
        ScriptedExplorer e;
        e.reset(s);
        e.observe(s);
        CHECK(e.plan(s) == Action::pick_up);
    }
    SUBCASE("locked door ahead with its key: toggle") {
        const FullState s = make_scene({{0, 1, Cell::make_door(Color::red, DoorState::locked)}},
                                       {Color::red, EntityKind::door}, ObjectDesc{Color::red, EntityKind::key},
                                       Task::UnlockLocal);
        ScriptedExplorer e;
        e.reset(s);
        e.observe(s);
        CHECK(e.plan(s) == Action::toggle);
    }
    SUBCASE("never undo the previous turn") {
        const FullState s = make_scene({}, kRedBall);
        const Observation obs = render_observation(s);
        ScriptedExplorer e;
        e.reset(s);
        e.observe(s);
        for (Action last : {Action::turn_left, Action::turn_right}) {
            History hh;
            hh.push("earlier", last);
            const Action a = e.explore({obs, init_graph(), hh, s, nullptr}).action;
            CHECK_FALSE(((last == Action::turn_left && a == Action::turn_right) ||
                         (last == Action::turn_right && a == Action::turn_left)));
        }
    }
    SUBCASE("deterministic without an rng") {
        const FullState s = make_scene({}, kRedBall);
        ScriptedExplorer a({0.5}), b({0.5});
        a.reset(s);
        b.reset(s);
        a.observe(s);
        b.observe(s);
        const Observation obs = render_observation(s);
        History h;
        for (int i = 0; i < 20; ++i)
            CHECK(a.explore({obs, init_graph(), h, s, nullptr}).action ==
                  b.explore({obs, init_graph(), h, s, nullptr}).action);
    }
}

TEST_CASE("scripted explorer visits all six FindObj rooms on at least 90 of 100 seeds") {
    int full = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Environment env(TaskSpec::make(Task::FindObj), (1ULL << 62) | seed);
        ScriptedExplorer e;
        e.reset(env.ground_truth());
        History h;
        Observation obs = env.reset();
        while (!env.ground_truth().done) {
            e.observe(env.ground_truth());
            const Action a = e.explore({obs, init_graph(), h, env.ground_truth(), nullptr}).action;
            h.push(obs.text(), a);
            obs = env.step(a).observation;
        }
        if (env.visited_rooms().size() == 6) ++full;
    }
    MESSAGE("rooms fully covered on " << full << " of 100 FindObj layouts");
    CHECK(full >= 90);
}

TEST_CASE("explore prompt and reply parsing") {
    const Observation obs{"go to the red ball", {"You see a wall 3 steps forward"}, std::nullopt};
    History h;
    h.push("You see a wall 4 steps forward", Action::go_forward);
    const std::string p = build_explore_prompt(Task::GoToLocal, obs, init_graph(), h);
    CHECK(p.find("avoid falling into a simple loop") != std::string::npos);
    CHECK(p.find("Current Room: room A") != std::string::npos);
    CHECK(p.find("You see a wall 4 steps forward") != std::string::npos);
    CHECK(parse_explore_reply("go forward") == Action::go_forward);
    CHECK(parse_explore_reply("Action: Turn Left.") == Action::turn_left);
    CHECK(parse_explore_reply("`pick_up`") == Action::pick_up);
    CHECK_FALSE(parse_explore_reply("I would go forward and then turn left").has_value());
}

TEST_CASE("LLM explorer falls back to the scripted policy on junk") {
    const FullState s = make_scene({}, kRedBall);
    const Observation obs = render_observation(s);
    History h;

    auto good = scripted_client("explore_good", {"toggle"});
    LlmExplorer a(*good, Task::GoToLocal);
    a.reset(s);
    a.observe(s);
    const auto ra = a.explore({obs, init_graph(), h, s, nullptr});
    CHECK(ra.action == Action::toggle);
    CHECK(ra.source == DecisionSource::llm_policy);

    auto junk = scripted_client("explore_junk", {"fly north"});
    LlmExplorer b(*junk, Task::GoToLocal);
    b.reset(s);
    b.observe(s);
    const auto rb = b.explore({obs, init_graph(), h, s, nullptr});
    CHECK(rb.source == DecisionSource::scripted_policy);
    CHECK(rb.note == "explore_unparseable");
    CHECK(b.fallbacks() == 1);
}

TEST_CASE("cache misses propagate out of decide") {
    LlmClientConfig cfg;
    cfg.cache_dir = std::filesystem::temp_directory_path() / "aec_tests" / "decide_miss";
    std::filesystem::remove_all(cfg.cache_dir);
    cfg.mode = CacheMode::cache_only;
    LlmClient client(cfg, nullptr);
    LlmCritic critic(client, Task::GoToLocal);
    const FullState s = make_scene({}, kRedBall);
    const Observation obs = render_observation(s);
    const std::optional<StateKey> key = oracle_encode(s, {});
    ScriptedExplorer e;
    e.reset(s);
    History h;
    CHECK_THROWS_AS(decide({0, obs, key, init_graph(), h, s}, nullptr, critic, e), CacheMiss);
}

TEST_CASE("trace JSON round trip") {
    DecisionTrace t;
    t.step = 4;
    t.mode = Mode::exploit;
    t.critical = true;
    t.key = "left;no;no,no,no;no";
    t.action = Action::toggle;
    t.source = DecisionSource::episodic;
    t.latency_ms = 1.25;
    t.notes = {"loop_guard"};
    const DecisionTrace back = trace_from_json(to_json(t));
    CHECK(back.same_decision(t));
}

}  // TEST_SUITE
