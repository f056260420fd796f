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

// Per-episode working memory: rooms as nodes, doors as directed triplets
// (room, "<color> <state> door", room) and the set of objects seen in each
// room. Updates only ever add; a door's state is the one mutable attribute.

#pragma once

#include <atomic>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aec/gridworld.hpp"

namespace aec {

class LlmClient;
class TranscriptLog;

/// "room A", "room B", ..., "room Z", "room AA", ...
std::string room_label(std::size_t index);
/// Sort order for labels: by length, then lexicographically.
bool label_less(const std::string& a, const std::string& b);

struct DoorRelation {
    Color color = Color::red;
    DoorState state = DoorState::closed;

    bool operator==(const DoorRelation&) const = default;
    /// "yellow locked door"
    std::string str() const;
};

std::optional<DoorRelation> parse_door_relation(std::string_view text);

struct EdgeTriplet {
    std::string subject;
    DoorRelation relation;
    std::string object;

    bool operator==(const EdgeTriplet&) const = default;
    /// Identity ignores the door state, which may be refreshed.
    bool same_edge(const EdgeTriplet& o) const {
        return subject == o.subject && object == o.object && relation.color == o.relation.color;
    }
};

/// Ground-truth bookkeeping used only by the oracle updater; never serialized.
struct OracleAnchors {
    std::map<int, std::string> room_labels;
    std::vector<std::pair<Position, std::size_t>> door_edges;  ///< door cell -> edge index
    bool operator==(const OracleAnchors&) const = default;
};

struct WorldGraph {
    std::vector<std::string> nodes;  ///< discovery order
    std::vector<EdgeTriplet> edges;  ///< insertion order
    std::map<std::string, std::set<ObjectDesc>> features;
    std::string current_room;
    OracleAnchors anchors;

    bool operator==(const WorldGraph&) const = default;
    bool has_node(const std::string& label) const;
    /// Index of the edge with the same identity, or -1.
    int find_edge(const EdgeTriplet& e) const;
    /// Adds the node if new; returns true when it was added.
    bool add_node(const std::string& label);
};

WorldGraph init_graph();

/// Deterministic text: "Current Room:" line, rooms in label order with objects
/// in canonical order, then triplets in insertion order.
std::string serialize(const WorldGraph& g);
nlohmann::json graph_to_json(const WorldGraph& g);

/// True when `next` keeps every node, edge (up to door state) and feature of `prev`.
bool retains_all(const WorldGraph& prev, const WorldGraph& next);

/// Fills the graph-update template.
std::string build_graph_prompt(const WorldGraph& graph, const std::string& prev_obs, Action action,
                               const std::string& new_obs);

struct GraphParseResult {
    WorldGraph graph;
    /// Prior items the output dropped and that were re-inserted.
    int violations = 0;
    std::vector<std::string> repairs;
};

/// Parses the model's graph and re-adds anything of `prior` it dropped.
/// Throws ParseError when the text has no usable "Current Room:" line or a
/// line that looks like a room or triplet cannot be read.
GraphParseResult parse_graph_output(std::string_view text, const WorldGraph& prior);

/// Ground-truth update for one transition: discovers rooms on traversal,
/// adds or refreshes the door edge, and unions visible objects into the
/// current room.
WorldGraph oracle_update(const WorldGraph& graph, const FullState& before, Action action, const FullState& after);

struct GraphTransition {
    const Observation& prev_obs;
    Action action;
    const Observation& new_obs;
    const FullState& before;
    const FullState& after;
};

class GraphUpdater {
public:
    virtual ~GraphUpdater() = default;
    virtual WorldGraph update(const WorldGraph& graph, const GraphTransition& t) = 0;

    std::uint64_t violations() const { return violations_.load(); }
    std::uint64_t parse_failures() const { return parse_failures_.load(); }

protected:
    std::atomic<std::uint64_t> violations_{0};
    std::atomic<std::uint64_t> parse_failures_{0};
};

class OracleGraphUpdater final : public GraphUpdater {
public:
    WorldGraph update(const WorldGraph& graph, const GraphTransition& t) override {
        return oracle_update(graph, t.before, t.action, t.after);
    }
};

/// Keeps the prior graph when the reply stays unparseable after re-prompts.
class LlmGraphUpdater final : public GraphUpdater {
public:
    LlmGraphUpdater(LlmClient& client, TranscriptLog* log = nullptr, int max_reprompts = 2)
        : client_(client), log_(log), max_reprompts_(max_reprompts) {}
    WorldGraph update(const WorldGraph& graph, const GraphTransition& t) override;

private:
    LlmClient& client_;
    TranscriptLog* log_;
    int max_reprompts_;
};

}  // namespace aec
