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

#include "aec/controller.hpp"

#include <chrono>
#include <limits>

#include "aec/llm_client.hpp"
#include "aec/prompts.hpp"

namespace aec {

std::string_view to_string(Mode m) { return m == Mode::exploit ? "exploit" : "explore"; }

std::string_view to_string(DecisionSource s) {
    switch (s) {
        case DecisionSource::episodic: return "episodic";
        case DecisionSource::llm_policy: return "llm_policy";
        case DecisionSource::scripted_policy: return "scripted_policy";
    }
    return "?";
}

std::optional<Mode> parse_mode(std::string_view s) {
    if (s == "explore") return Mode::explore;
    if (s == "exploit") return Mode::exploit;
    return std::nullopt;
}

std::optional<DecisionSource> parse_source(std::string_view s) {
    for (auto src : {DecisionSource::episodic, DecisionSource::llm_policy, DecisionSource::scripted_policy})
        if (to_string(src) == s) return src;
    return std::nullopt;
}

bool DecisionTrace::same_decision(const DecisionTrace& o) const {
    return step == o.step && mode == o.mode && critical == o.critical && key == o.key && action == o.action &&
           source == o.source && notes == o.notes;
}

nlohmann::json to_json(const DecisionTrace& t) {
    return {{"step", t.step},
            {"mode", to_string(t.mode)},
            {"critical", t.critical},
            {"key", t.key},
            {"action", action_id(t.action)},
            {"source", to_string(t.source)},
            {"latency_ms", t.latency_ms},
            {"notes", t.notes}};
}

DecisionTrace trace_from_json(const nlohmann::json& j) {
    DecisionTrace t;
    t.step = j.at("step").get<int>();
    auto mode = parse_mode(j.at("mode").get<std::string>());
    auto action = parse_action(j.at("action").get<std::string>());
    auto source = parse_source(j.at("source").get<std::string>());
    if (!mode || !action || !source) throw ParseError("bad decision trace record", j.dump());
    t.mode = *mode;
    t.action = *action;
    t.source = *source;
    t.critical = j.at("critical").get<bool>();
    t.key = j.at("key").get<std::string>();
    t.latency_ms = j.value("latency_ms", 0.0);
    t.notes = j.value("notes", std::vector<std::string>{});
    return t;
}

// ---------------------------------------------------------------------------
// Criticality
// ---------------------------------------------------------------------------

bool oracle_is_critical(const StateKey& key) { return !key.target_directions.empty(); }

std::string build_critic_prompt(Task task, std::string_view mission, const StateKey& key) {
    return prompts::render(prompts::critic_template(), {{"game description", prompts::game_description(task)},
                                                        {"mission", std::string(mission)},
                                                        {"observation after embedding", format_encoder_output(key)}});
}

std::optional<bool> parse_critic_reply(std::string_view reply) {
    std::string s = to_lower(trim(reply));
    auto strip = [&](char c) {
        while (!s.empty() && s.front() == c) s.erase(s.begin());
        while (!s.empty() && s.back() == c) s.pop_back();
    };
    strip('"');
    strip('\'');
    strip('.');
    s = trim(s);
    if (s == "yes") return true;
    if (s == "no") return false;
    return std::nullopt;
}

bool LlmCritic::is_critical(const StateKey& key, std::string_view mission) {
    const std::string prompt = build_critic_prompt(task_, mission, key);
    std::vector<ChatMessage> messages{{"user", prompt}};
    for (int attempt = 0; attempt <= max_reprompts_; ++attempt) {
        const std::string reply = client_.complete(client_.make_request(messages));
        const auto verdict = parse_critic_reply(reply);
        if (log_) log_->append({{"kind", "critic"}, {"reply", reply}, {"attempt", attempt}, {"parsed", verdict.has_value()}});
        if (verdict) {
            if (*verdict != oracle_is_critical(key)) ++disagreements_;
            return *verdict;
        }
        messages.push_back({"assistant", reply});
        messages.push_back({"user", "Answer with exactly one word: yes or no."});
    }
    ++failures_;
    return false;
}

bool is_critical(const StateKey& key, std::string_view mission, CriticBackend& backend) {
    return backend.is_critical(key, mission);
}

std::optional<Action> exploit(const EpisodicMemory& memory, const CanonicalKey& key) {
    if (auto best = memory.best_action(key)) return best->first;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// History
// ---------------------------------------------------------------------------

void History::push(std::string observation, Action action) {
    ++taken_[{observation, action}];
    items_.emplace_back(std::move(observation), action);
    while (items_.size() > capacity_) items_.pop_front();
}

std::string History::render() const {
    if (items_.empty()) return "(none)";
    std::string out;
    for (const auto& [obs, action] : items_) {
        if (!out.empty()) out += "\n\n";
        out += "Observation:\n" + obs + "\nAction: " + std::string(action_phrase(action));
    }
    return out;
}

int History::count(const std::string& observation, Action action) const {
    const auto it = taken_.find({observation, action});
    return it == taken_.end() ? 0 : it->second;
}

std::optional<Action> History::last_action() const {
    if (items_.empty()) return std::nullopt;
    return items_.back().second;
}

// ---------------------------------------------------------------------------
// Scripted explorer
// ---------------------------------------------------------------------------

void ScriptedExplorer::reset(const FullState& initial) {
    width_ = initial.width;
    tick_ = 0;
    seen_.assign(initial.grid.size(), false);
    last_visit_.assign(initial.grid.size(), -1);
}

void ScriptedExplorer::observe(const FullState& s) {
    if (width_ != s.width || seen_.size() != s.grid.size()) reset(s);
    ++tick_;
    last_visit_[static_cast<std::size_t>(s.agent.y * width_ + s.agent.x)] = tick_;
    const ViewMask mask = compute_visibility(s);
    for (int vy = 0; vy < kViewSize; ++vy) {
        for (int vx = 0; vx < kViewSize; ++vx) {
            if (!mask[static_cast<std::size_t>(vy)][static_cast<std::size_t>(vx)]) continue;
            const Position p = view_to_world(s, vx, vy);
            if (s.in_bounds(p)) seen_[static_cast<std::size_t>(p.y * width_ + p.x)] = true;
        }
    }
}

namespace {

bool holds_key_for(const FullState& s, const Cell& door) {
    return s.carrying && s.carrying->kind == EntityKind::key && s.carrying->color == door.color;
}

/// Cells the explorer is willing to route through.
bool routable(const FullState& s, const Cell& c) {
    if (c.passable()) return true;
    if (c.type != CellType::door) return false;
    return c.door == DoorState::closed || holds_key_for(s, c);
}

Action face_or_advance(const FullState& s, Position next) {
    for (Direction d : kAllDirections) {
        if (step_towards(s.agent, d) != next) continue;
        if (d == s.dir) {
            const Cell c = s.at(next);
            return c.type == CellType::door && c.door != DoorState::open ? Action::toggle : Action::go_forward;
        }
        return d == turn_left(s.dir) ? Action::turn_left : Action::turn_right;
    }
    return Action::turn_left;
}

}  // namespace

Action ScriptedExplorer::plan(const FullState& s) const {
    const Cell front = s.at(s.front());
    if (s.task == Task::UnlockLocal && !s.carrying && front.type == CellType::key) return Action::pick_up;
    if (front.type == CellType::door && front.door == DoorState::locked && holds_key_for(s, front)) return Action::toggle;
    if (front.type == CellType::door && front.door == DoorState::closed) return Action::toggle;
    if (seen_.empty()) return Action::turn_left;

    const auto idx = [&](Position p) { return static_cast<std::size_t>(p.y * width_ + p.x); };
    const auto is_seen = [&](Position p) { return !s.in_bounds(p) || seen_[idx(p)]; };

    // Turning in place reveals unseen neighbours of the agent's own cell.
    const auto unseen_side = [&](Position p) {
        for (Direction d : kAllDirections)
            if (!is_seen(step_towards(p, d))) return true;
        return false;
    };
    if (unseen_side(s.agent)) {
        if (!is_seen(step_towards(s.agent, turn_left(s.dir)))) return Action::turn_left;
        return Action::turn_right;
    }

    // BFS from the agent, remembering the first step of each path.
    std::vector<int> first(s.grid.size(), -1);
    std::vector<Position> order;
    first[idx(s.agent)] = -2;
    order.push_back(s.agent);
    std::vector<Position> step_of(s.grid.size());
    for (std::size_t head = 0; head < order.size(); ++head) {
        const Position p = order[head];
        for (Direction d : kAllDirections) {
            const Position n = step_towards(p, d);
            if (!s.in_bounds(n) || first[idx(n)] != -1 || !is_seen(n) || !routable(s, s.at(n))) continue;
            first[idx(n)] = 0;
            step_of[idx(n)] = p == s.agent ? n : step_of[idx(p)];
            order.push_back(n);
        }
    }

    std::optional<Position> goal;
    for (std::size_t i = 1; i < order.size() && !goal; ++i)
        if (unseen_side(order[i])) goal = order[i];
    for (std::size_t i = 1; i < order.size() && !goal; ++i)
        if (last_visit_[idx(order[i])] < 0) goal = order[i];
    if (!goal) {
        int oldest = std::numeric_limits<int>::max();
        for (std::size_t i = 1; i < order.size(); ++i) {
            if (last_visit_[idx(order[i])] < oldest) {
                oldest = last_visit_[idx(order[i])];
                goal = order[i];
            }
        }
    }
    if (!goal) return Action::turn_left;
    return face_or_advance(s, step_of[idx(*goal)]);
}

ExploreResult ScriptedExplorer::explore(const ExploreRequest& req) {
    if (req.rng && opts_.epsilon > 0.0 && req.rng->chance(opts_.epsilon))
        return {kAllActions[req.rng->below(kNumActions)], DecisionSource::scripted_policy, {}};
    const FullState& s = req.truth;
    Action a = plan(s);
    // Never undo the previous turn: keep turning the same way or step ahead.
    const auto last = req.history.last_action();
    const bool reversal = last && ((*last == Action::turn_left && a == Action::turn_right) ||
                                   (*last == Action::turn_right && a == Action::turn_left));
    const bool open_ahead = s.at(s.front()).passable();
    if (reversal) a = open_ahead ? Action::go_forward : *last;

    // Back at an identical observation: prefer something not yet tried from it.
    const std::string obs = req.obs.text();
    if (req.history.count(obs, a) > 0) {
        std::vector<Action> options{Action::go_forward, Action::turn_left, Action::turn_right};
        if (!open_ahead) options.erase(options.begin());
        for (Action alt : options) {
            if (req.history.count(obs, alt) == 0) {
                a = alt;
                break;
            }
        }
    }
    return {a, DecisionSource::scripted_policy, {}};
}

// ---------------------------------------------------------------------------
// LLM explorer
// ---------------------------------------------------------------------------

std::string build_explore_prompt(Task task, const Observation& obs, const WorldGraph& graph, const History& history) {
    return prompts::render(prompts::explore_template(), {{"game description", prompts::game_description(task)},
                                                         {"mission", obs.mission},
                                                         {"action space", prompts::action_space()},
                                                         {"world model", serialize(graph)},
                                                         {"history", history.render()},
                                                         {"observation", obs.text()},
                                                         {"Format requirements", std::string(prompts::explore_format())}});
}

std::optional<Action> parse_explore_reply(std::string_view reply) {
    std::string s = to_lower(squash_spaces(reply));
    while (!s.empty() && std::string_view("\"'`.*:").find(s.back()) != std::string_view::npos) s.pop_back();
    while (!s.empty() && std::string_view("\"'`*").find(s.front()) != std::string_view::npos) s.erase(s.begin());
    if (starts_with_ci(s, "action:")) s = trim(s.substr(7));
    return parse_action(s);
}

ExploreResult LlmExplorer::explore(const ExploreRequest& req) {
    std::string prompt = build_explore_prompt(task_, req.obs, req.graph, req.history);
    std::vector<ChatMessage> messages{{"user", std::move(prompt)}};
    std::string note;
    try {
        for (int attempt = 0; attempt <= max_reprompts_; ++attempt) {
            const std::string reply = client_.complete(client_.make_request(messages));
            const auto action = parse_explore_reply(reply);
            if (log_) log_->append({{"kind", "explore"}, {"reply", reply}, {"attempt", attempt}, {"parsed", action.has_value()}});
            if (action) return {*action, DecisionSource::llm_policy, {}};
            messages.push_back({"assistant", reply});
            messages.push_back({"user", "Answer with exactly one action from the action space and nothing else."});
        }
        note = "explore_unparseable";
    } catch (const CacheMiss&) {
        throw;
    } catch (const Error& e) {
        note = std::string("explore_backend_error: ") + e.what();
    }
    ++fallbacks_;
    ExploreResult r = fallback_.explore({req.obs, req.graph, req.history, req.truth, nullptr});
    r.note = note;
    return r;
}

// ---------------------------------------------------------------------------
// Decision
// ---------------------------------------------------------------------------

Decision decide(const DecisionContext& ctx, const EpisodicMemory* memory, CriticBackend& critic, Explorer& explorer,
                const DecideOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    Decision d;
    DecisionTrace& tr = d.trace;
    tr.step = ctx.step;

    std::optional<Action> chosen;
    if (!ctx.key) {
        tr.notes.push_back("encode_failed");
    } else {
        const CanonicalKey key = canonicalize(*ctx.key);
        tr.key = key.value;
        const auto failures_before = critic.failures();
        try {
            tr.critical = is_critical(*ctx.key, ctx.obs.mission, critic);
        } catch (const CacheMiss&) {
            throw;
        } catch (const Error& e) {
            tr.notes.push_back(std::string("critic_backend_error: ") + e.what());
            tr.critical = false;
        }
        if (critic.failures() != failures_before) tr.notes.push_back("critic_unparseable");

        if (tr.critical && memory) {
            const bool defer = opts.rng && opts.defer_epsilon > 0.0 && opts.rng->chance(opts.defer_epsilon);
            if (!defer) chosen = exploit(*memory, key);
            if (chosen && opts.loop_repeats > 0 && ctx.history.count(ctx.obs.text(), *chosen) >= opts.loop_repeats) {
                tr.notes.push_back("loop_guard");
                chosen.reset();
            }
        }
    }

    if (chosen) {
        d.action = *chosen;
        tr.mode = Mode::exploit;
        tr.source = DecisionSource::episodic;
    } else {
        ExploreResult r = explorer.explore({ctx.obs, ctx.graph, ctx.history, ctx.truth, opts.rng});
        d.action = r.action;
        tr.mode = Mode::explore;
        tr.source = r.source;
        if (!r.note.empty()) tr.notes.push_back(std::move(r.note));
    }
    tr.action = d.action;
    tr.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return d;
}

}  // namespace aec
