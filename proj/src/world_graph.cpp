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

#include "aec/world_graph.hpp"

#include <algorithm>
#include <regex>
#include <sstream>

#include "aec/llm_client.hpp"
#include "aec/prompts.hpp"

namespace aec {

std::string room_label(std::size_t index) {
    std::string letters;
    std::size_t n = index + 1;
    while (n > 0) {
        --n;
        letters.insert(letters.begin(), static_cast<char>('A' + n % 26));
        n /= 26;
    }
    return "room " + letters;
}

bool label_less(const std::string& a, const std::string& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
}

std::string DoorRelation::str() const {
    return std::string(to_string(color)) + " " + std::string(to_string(state)) + " door";
}

std::optional<DoorRelation> parse_door_relation(std::string_view text) {
    std::istringstream in(to_lower(squash_spaces(text)));
    std::vector<std::string> words;
    for (std::string w; in >> w;) words.push_back(w);
    if (words.size() != 3 || words[2] != "door") return std::nullopt;
    for (int order = 0; order < 2; ++order) {
        const auto color = parse_color(words[order == 0 ? 0 : 1]);
        const auto state = parse_door_state(words[order == 0 ? 1 : 0]);
        if (color && state) return DoorRelation{*color, *state};
    }
    return std::nullopt;
}

bool WorldGraph::has_node(const std::string& label) const {
    return std::find(nodes.begin(), nodes.end(), label) != nodes.end();
}

int WorldGraph::find_edge(const EdgeTriplet& e) const {
    for (std::size_t i = 0; i < edges.size(); ++i)
        if (edges[i].same_edge(e)) return static_cast<int>(i);
    return -1;
}

bool WorldGraph::add_node(const std::string& label) {
    if (has_node(label)) return false;
    nodes.push_back(label);
    features.try_emplace(label);
    return true;
}

WorldGraph init_graph() {
    WorldGraph g;
    g.add_node(room_label(0));
    g.current_room = room_label(0);
    return g;
}

std::string serialize(const WorldGraph& g) {
    std::vector<std::string> labels = g.nodes;
    std::sort(labels.begin(), labels.end(), label_less);
    std::string out = "Current Room: " + g.current_room;
    for (const auto& label : labels) {
        out += "\n" + label + " [";
        if (auto it = g.features.find(label); it != g.features.end()) {
            bool first = true;
            for (const auto& obj : it->second) {
                if (!first) out += ", ";
                out += obj.str();
                first = false;
            }
        }
        out += "]";
    }
    for (const auto& e : g.edges) out += "\n" + e.subject + ", " + e.relation.str() + ", " + e.object;
    return out;
}

nlohmann::json graph_to_json(const WorldGraph& g) {
    nlohmann::json features = nlohmann::json::object();
    for (const auto& label : g.nodes) {
        nlohmann::json items = nlohmann::json::array();
        if (auto it = g.features.find(label); it != g.features.end())
            for (const auto& obj : it->second) items.push_back(obj.str());
        features[label] = std::move(items);
    }
    nlohmann::json triplets = nlohmann::json::array();
    for (const auto& e : g.edges) triplets.push_back({e.subject, e.relation.str(), e.object});
    return {{"current_room", g.current_room}, {"nodes", g.nodes}, {"features", features}, {"triplets", triplets}};
}

bool retains_all(const WorldGraph& prev, const WorldGraph& next) {
    for (const auto& n : prev.nodes)
        if (!next.has_node(n)) return false;
    for (const auto& e : prev.edges)
        if (next.find_edge(e) < 0) return false;
    for (const auto& [label, objs] : prev.features) {
        auto it = next.features.find(label);
        for (const auto& o : objs)
            if (it == next.features.end() || !it->second.contains(o)) return false;
    }
    return true;
}

std::string build_graph_prompt(const WorldGraph& graph, const std::string& prev_obs, Action action,
                               const std::string& new_obs) {
    return prompts::render(prompts::graph_template(), {{"world model", serialize(graph)},
                                                       {"previous observation", prev_obs},
                                                       {"action", std::string(action_phrase(action))},
                                                       {"new observation", new_obs},
                                                       {"Format requirements", std::string(prompts::graph_format())}});
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace {

std::optional<std::string> parse_room_label(std::string_view text) {
    static const std::regex re(R"(^\s*room\s+([A-Za-z]+)\s*$)", std::regex::icase);
    std::cmatch m;
    const std::string s(text);
    if (!std::regex_match(s.c_str(), m, re)) return std::nullopt;
    std::string letters = m[1].str();
    for (auto& ch : letters) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return "room " + letters;
}

std::string strip_decoration(std::string_view line) {
    std::string s = trim(line);
    // Bullets, numbering and surrounding parentheses or backticks.
    while (!s.empty() && (s.front() == '-' || s.front() == '*' || s.front() == '`')) s = trim(s.substr(1));
    while (!s.empty() && (s.back() == '`' || s.back() == ';' || s.back() == '.')) s = trim(s.substr(0, s.size() - 1));
    if (s.size() >= 2 && s.front() == '(' && s.back() == ')') s = trim(s.substr(1, s.size() - 2));
    return s;
}

std::vector<std::string> split_commas(std::string_view s) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            parts.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parts.push_back(trim(cur));
    return parts;
}

}  // namespace

GraphParseResult parse_graph_output(std::string_view text, const WorldGraph& prior) {
    static const std::regex room_group(R"(room\s+([A-Za-z]+)\s*\[([^\]]*)\])", std::regex::icase);

    WorldGraph parsed;
    parsed.anchors = prior.anchors;
    std::optional<std::string> current;

    std::istringstream in{std::string(text)};
    for (std::string raw; std::getline(in, raw);) {
        const std::string line = strip_decoration(raw);
        if (line.empty()) continue;

        if (starts_with_ci(line, "current room")) {
            const auto colon = line.find(':');
            auto label = colon == std::string::npos ? std::nullopt : parse_room_label(line.substr(colon + 1));
            if (!label) throw ParseError("unreadable current-room line", raw);
            current = label;
            continue;
        }

        if (line.find('[') != std::string::npos) {
            bool matched = false;
            for (std::sregex_iterator it(line.begin(), line.end(), room_group), end; it != end; ++it) {
                matched = true;
                const auto label = *parse_room_label("room " + (*it)[1].str());
                parsed.add_node(label);
                const std::string body = trim((*it)[2].str());
                if (body.empty()) continue;
                for (const auto& item : split_commas(body)) {
                    if (item.empty()) continue;
                    auto obj = parse_object_desc(item);
                    if (obj && obj->kind != EntityKind::door && obj->kind != EntityKind::wall) {
                        parsed.features[label].insert(*obj);
                        continue;
                    }
                    // Doors and walls are not room features; anything else is garbage.
                    if (parse_door_relation(item) || to_lower(item).find("wall") != std::string::npos) continue;
                    throw ParseError("unknown object '" + item + "' in room line", raw);
                }
            }
            if (!matched) throw ParseError("malformed room line", raw);
            continue;
        }

        const auto parts = split_commas(line);
        if (parts.size() == 3) {
            auto subject = parse_room_label(parts[0]);
            auto object = parse_room_label(parts[2]);
            auto relation = parse_door_relation(parts[1]);
            if (subject && object && relation) {
                parsed.add_node(*subject);
                parsed.add_node(*object);
                EdgeTriplet e{*subject, *relation, *object};
                if (int idx = parsed.find_edge(e); idx >= 0)
                    parsed.edges[static_cast<std::size_t>(idx)].relation.state = relation->state;
                else
                    parsed.edges.push_back(e);
                continue;
            }
            if (subject || object) throw ParseError("malformed triplet", raw);
        }
        // Headings and chatter are ignored.
    }
    if (!current) throw ParseError("missing 'Current Room:' line", "");
    parsed.add_node(*current);
    parsed.current_room = *current;

    // Rebuild in the prior's discovery order, new nodes after, then restore
    // everything the reply dropped.
    GraphParseResult result;
    WorldGraph& g = result.graph;
    g.anchors = prior.anchors;
    g.current_room = parsed.current_room;
    for (const auto& n : prior.nodes) {
        g.add_node(n);
        if (!parsed.has_node(n)) {
            ++result.violations;
            result.repairs.push_back("node " + n);
        }
    }
    for (const auto& n : parsed.nodes) g.add_node(n);

    for (const auto& [label, objs] : prior.features) {
        g.features[label].insert(objs.begin(), objs.end());
        const auto it = parsed.features.find(label);
        for (const auto& o : objs) {
            if (it == parsed.features.end() || !it->second.contains(o)) {
                ++result.violations;
                result.repairs.push_back("feature " + label + " " + o.str());
            }
        }
    }
    for (const auto& [label, objs] : parsed.features) g.features[label].insert(objs.begin(), objs.end());

    // Prior edges keep their slot; the reply may refresh a door's state.
    for (const auto& e : prior.edges) {
        EdgeTriplet kept = e;
        if (int idx = parsed.find_edge(e); idx >= 0) {
            kept.relation.state = parsed.edges[static_cast<std::size_t>(idx)].relation.state;
        } else {
            ++result.violations;
            result.repairs.push_back("edge " + e.subject + ", " + e.relation.str() + ", " + e.object);
        }
        g.edges.push_back(kept);
    }
    for (const auto& e : parsed.edges)
        if (g.find_edge(e) < 0) g.edges.push_back(e);
    return result;
}

// ---------------------------------------------------------------------------
// Oracle updater
// ---------------------------------------------------------------------------

WorldGraph oracle_update(const WorldGraph& graph, const FullState& before, Action action, const FullState& after) {
    (void)action;
    WorldGraph g = graph;
    auto& labels = g.anchors.room_labels;
    if (labels.empty()) {
        if (g.nodes.empty()) g = init_graph();
        labels[before.current_room] = g.current_room;
    }
    auto label_for = [&](int room) -> const std::string& {
        auto it = labels.find(room);
        if (it != labels.end()) return it->second;
        const std::string label = room_label(g.nodes.size());
        g.add_node(label);
        return labels.emplace(room, label).first->second;
    };

    if (after.current_room != before.current_room) {
        const std::string from = label_for(before.current_room);
        const std::string to = label_for(after.current_room);
        const Cell door = before.at(before.agent);
        if (door.type == CellType::door) {
            EdgeTriplet e{from, {door.color, after.at(before.agent).door}, to};
            if (int idx = g.find_edge(e); idx >= 0) {
                g.edges[static_cast<std::size_t>(idx)].relation.state = e.relation.state;
            } else {
                g.edges.push_back(e);
                g.anchors.door_edges.emplace_back(before.agent, g.edges.size() - 1);
            }
        }
        g.current_room = to;
    }

    const ViewMask mask = compute_visibility(after);
    std::set<Position> seen;
    for (int vy = 0; vy < kViewSize; ++vy)
        for (int vx = 0; vx < kViewSize; ++vx)
            if (mask[static_cast<std::size_t>(vy)][static_cast<std::size_t>(vx)]) seen.insert(view_to_world(after, vx, vy));

    for (const auto& p : seen) {
        const Cell c = after.at(p);
        if (!c.is_object()) continue;
        // Objects are filed under the room they lie in once that room has a label.
        auto it = labels.find(after.room_at(p));
        if (it != labels.end()) g.features[it->second].insert(*c.desc());
    }
    for (const auto& [pos, idx] : g.anchors.door_edges)
        if (seen.contains(pos)) g.edges[idx].relation.state = after.at(pos).door;
    return g;
}

// ---------------------------------------------------------------------------
// LLM updater
// ---------------------------------------------------------------------------

WorldGraph LlmGraphUpdater::update(const WorldGraph& graph, const GraphTransition& t) {
    const std::string prompt = build_graph_prompt(graph, t.prev_obs.text(), t.action, t.new_obs.text());
    std::vector<ChatMessage> messages{{"user", prompt}};
    std::string last_error;
    for (int attempt = 0; attempt <= max_reprompts_; ++attempt) {
        const std::string reply = client_.complete(client_.make_request(messages));
        try {
            GraphParseResult r = parse_graph_output(reply, graph);
            violations_ += static_cast<std::uint64_t>(r.violations);
            if (log_) log_->append({{"kind", "graph"}, {"reply", reply}, {"attempt", attempt},
                                    {"violations", r.violations}, {"repairs", r.repairs}});
            return std::move(r.graph);
        } catch (const ParseError& e) {
            last_error = e.what();
            if (log_) log_->append({{"kind", "graph"}, {"reply", reply}, {"attempt", attempt}, {"error", last_error}});
            messages.push_back({"assistant", reply});
            messages.push_back({"user", "Your answer could not be parsed (" + last_error +
                                            "). Reply again with only the knowledge graph in the OUTPUT FORMAT."});
        }
    }
    ++parse_failures_;
    return graph;
}

}  // namespace aec
