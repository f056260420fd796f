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


// Brute-force reference implementations used by the unit and acceptance
// tests. They are written independently of the library code they check.

#pragma once

#include <array>
#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "aec/episodic_memory.hpp"
#include "aec/gridworld.hpp"

namespace aec::oracle {

/// World offset of an egocentric (lateral, forward) pair, by explicit cases.
inline Position ego_to_world(const FullState& s, int lateral, int forward) {
    switch (s.dir) {
        case Direction::north: return {s.agent.x + lateral, s.agent.y - forward};
        case Direction::south: return {s.agent.x - lateral, s.agent.y + forward};
        case Direction::east: return {s.agent.x + forward, s.agent.y + lateral};
        case Direction::west: return {s.agent.x - forward, s.agent.y - lateral};
    }
    return s.agent;
}

inline bool cell_blocks_sight(const FullState& s, Position p) {
    if (!s.in_bounds(p)) return true;
    const Cell& c = s.grid[static_cast<std::size_t>(p.y * s.width + p.x)];
    return c.type == CellType::wall || (c.type == CellType::door && c.door != DoorState::open);
}

/// Visible (lateral, forward) offsets inside the 7x7 window: everything
/// reachable from the agent through see-through cells by sideways, ahead or
/// diagonal-ahead moves. The last cell of a path may itself be opaque.
inline std::set<std::pair<int, int>> visible_offsets(const FullState& s) {
    std::set<std::pair<int, int>> seen{{0, 0}};
    std::deque<std::pair<int, int>> queue{{0, 0}};
    while (!queue.empty()) {
        const auto [lat, fwd] = queue.front();
        queue.pop_front();
        if (cell_blocks_sight(s, ego_to_world(s, lat, fwd))) continue;
        for (const auto& [dl, df] : {std::pair{-1, 0}, {1, 0}, {0, 1}, {-1, 1}, {1, 1}}) {
            const int l = lat + dl, f = fwd + df;
            if (l < -3 || l > 3 || f < 0 || f > 6) continue;
            if (seen.insert({l, f}).second) queue.push_back({l, f});
        }
    }
    return seen;
}

/// Sentences for visible non-wall entities, rendered from the offsets above.
inline std::multiset<std::string> expected_entity_lines(const FullState& s) {
    auto steps = [](int n) { return std::to_string(n) + (n == 1 ? " step" : " steps"); };
    std::multiset<std::string> out;
    for (const auto& [lat, fwd] : visible_offsets(s)) {
        if (lat == 0 && fwd == 0) continue;
        const Position p = ego_to_world(s, lat, fwd);
        if (!s.in_bounds(p)) continue;
        const Cell& c = s.grid[static_cast<std::size_t>(p.y * s.width + p.x)];
        std::string name;
        if (c.type == CellType::door) {
            const char* st = c.door == DoorState::open ? "open" : c.door == DoorState::closed ? "closed" : "locked";
            name = std::string(st) + " " + std::string(to_string(c.color)) + " door";
        } else if (auto d = c.desc()) {
            name = d->str();
        } else {
            continue;
        }
        std::string where;
        if (lat != 0) where = steps(std::abs(lat)) + (lat < 0 ? " left" : " right");
        if (fwd > 0) where += (where.empty() ? "" : " and ") + steps(fwd) + " forward";
        const bool open = c.type == CellType::door && c.door == DoorState::open;
        out.insert(std::string(open ? "You see an " : "You see a ") + name + " " + where);
    }
    return out;
}

/// Fewest turn/forward actions until the agent faces a cell holding `target`.
/// Doors are treated as they are; nothing is picked up or toggled.
inline std::optional<int> goto_shortest(const FullState& s, ObjectDesc target) {
    auto faces_target = [&](Position p, int d) {
        static constexpr std::array<std::pair<int, int>, 4> step{{{0, -1}, {1, 0}, {0, 1}, {-1, 0}}};
        const Position f{p.x + step[d].first, p.y + step[d].second};
        if (!s.in_bounds(f)) return false;
        const auto desc = s.grid[static_cast<std::size_t>(f.y * s.width + f.x)].desc();
        return desc && *desc == target;
    };
    static constexpr std::array<std::pair<int, int>, 4> step{{{0, -1}, {1, 0}, {0, 1}, {-1, 0}}};
    std::map<std::tuple<int, int, int>, int> dist;
    std::deque<std::tuple<int, int, int>> queue;
    const auto start = std::tuple{s.agent.x, s.agent.y, static_cast<int>(s.dir)};
    dist[start] = 0;
    queue.push_back(start);
    while (!queue.empty()) {
        const auto cur = queue.front();
        queue.pop_front();
        const auto [x, y, d] = cur;
        if (faces_target({x, y}, d)) return dist[cur];
        std::vector<std::tuple<int, int, int>> next{{x, y, (d + 3) % 4}, {x, y, (d + 1) % 4}};
        const Position f{x + step[d].first, y + step[d].second};
        if (s.in_bounds(f) && s.grid[static_cast<std::size_t>(f.y * s.width + f.x)].passable())
            next.push_back({f.x, f.y, d});
        for (const auto& n : next)
            if (dist.emplace(n, dist[cur] + 1).second) queue.push_back(n);
    }
    return std::nullopt;
}

/// Forward definition: R_t = sum_{k >= t} gamma^(k - t) r_k.
inline std::vector<double> forward_returns(const std::vector<double>& rewards, double gamma) {
    std::vector<double> out(rewards.size(), 0.0);
    for (std::size_t t = 0; t < rewards.size(); ++t) {
        double sum = 0.0;
        for (std::size_t k = t; k < rewards.size(); ++k) sum += std::pow(gamma, static_cast<double>(k - t)) * rewards[k];
        out[t] = sum;
    }
    return out;
}

/// Memory as a flat list of (key, action, value), searched linearly.
struct LinearMemory {
    struct Row {
        std::string key;
        Action action;
        double value;
    };
    std::vector<Row> rows;

    void commit_max(const std::string& key, Action a, double v) {
        for (auto& r : rows)
            if (r.key == key && r.action == a) {
                if (v > r.value) r.value = v;
                return;
            }
        rows.push_back({key, a, v});
    }
    std::optional<double> value(const std::string& key, Action a) const {
        for (const auto& r : rows)
            if (r.key == key && r.action == a) return r.value;
        return std::nullopt;
    }
    bool has_key(const std::string& key) const {
        for (const auto& r : rows)
            if (r.key == key) return true;
        return false;
    }
    /// Exhaustive argmax over the six actions; the first maximum wins.
    std::optional<std::pair<Action, double>> best(const std::string& key) const {
        std::optional<std::pair<Action, double>> out;
        for (Action a : kAllActions) {
            const auto v = value(key, a);
            if (v && (!out || *v > out->second)) out = {{a, *v}};
        }
        return out;
    }
};

}  // namespace aec::oracle
