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

#include "aec/gridworld.hpp"

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <sstream>
#include <unordered_map>

#include "aec/rng.hpp"

namespace aec {

using nlohmann::json;

namespace {

constexpr int kMaxGenerationAttempts = 200;

Position unit_vector(Direction d) {
    switch (d) {
        case Direction::north: return {0, -1};
        case Direction::east: return {1, 0};
        case Direction::south: return {0, 1};
        case Direction::west: return {-1, 0};
    }
    return {0, 0};
}

CellType type_of(EntityKind k) {
    switch (k) {
        case EntityKind::key: return CellType::key;
        case EntityKind::ball: return CellType::ball;
        case EntityKind::box: return CellType::box;
        case EntityKind::door: return CellType::door;
        case EntityKind::wall: return CellType::wall;
    }
    return CellType::empty;
}

std::string plural_steps(int n) { return std::to_string(n) + (n == 1 ? " step" : " steps"); }

}  // namespace

Position step_towards(Position p, Direction d, int n) {
    const Position u = unit_vector(d);
    return {p.x + u.x * n, p.y + u.y * n};
}

std::optional<ObjectDesc> Cell::desc() const {
    switch (type) {
        case CellType::key: return ObjectDesc{color, EntityKind::key};
        case CellType::ball: return ObjectDesc{color, EntityKind::ball};
        case CellType::box: return ObjectDesc{color, EntityKind::box};
        case CellType::door: return ObjectDesc{color, EntityKind::door};
        default: return std::nullopt;
    }
}

Cell Cell::object(ObjectDesc d) { return {type_of(d.kind), d.color, DoorState::open}; }

std::string_view to_string(Split s) { return s == Split::no_change ? "no_change" : "new_object"; }

std::optional<Split> parse_split(std::string_view s) {
    const std::string v = to_lower(trim(s));
    if (v == "no_change" || v == "no-change") return Split::no_change;
    if (v == "new_object" || v == "new-object") return Split::new_object;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Task specs and splits
// ---------------------------------------------------------------------------

TaskSpec TaskSpec::make(Task task, Split split) {
    TaskSpec s;
    s.task = task;
    s.split = split;
    switch (task) {
        case Task::GoToLocal:
        case Task::PickupLocal:
            s.room_rows = 1;
            s.room_cols = 1;
            s.room_size = 8;
            s.distractors = 8;
            s.max_steps = 64;
            break;
        case Task::UnlockLocal:
            s.room_rows = 1;
            s.room_cols = 2;
            s.room_size = 8;
            s.distractors = 0;
            s.max_steps = 64;
            break;
        case Task::FindObj:
            s.room_rows = 2;
            s.room_cols = 3;
            s.room_size = 6;
            s.distractors = 0;
            s.max_steps = 320;
            break;
    }
    return s;
}

void TaskSpec::validate() const {
    if (room_size < 4) throw ConfigError("room_size must be >= 4");
    if (max_steps <= 0) throw ConfigError("max_steps must be positive");
    if (distractors < 0) throw ConfigError("distractor count must be non-negative");
    const int rooms = room_rows * room_cols;
    switch (task) {
        case Task::GoToLocal:
        case Task::PickupLocal:
            if (rooms != 1) throw ConfigError(std::string(to_string(task)) + " is a single-room task");
            break;
        case Task::UnlockLocal:
            if (rooms < 2) throw ConfigError("UnlockLocal needs a second room behind the locked door");
            break;
        case Task::FindObj:
            if (rooms < 2) throw ConfigError("FindObj needs several rooms");
            break;
    }
    if (target) {
        const auto pool = target_pairs(task);
        if (std::find(pool.begin(), pool.end(), *target) == pool.end())
            throw ConfigError(target->str() + " is not a valid target for " + std::string(to_string(task)));
    }
}

std::vector<ObjectDesc> target_pairs(Task task) {
    std::vector<ObjectDesc> out;
    for (Color c : kAllColors) {
        if (task == Task::UnlockLocal) {
            out.push_back({c, EntityKind::door});
        } else {
            for (EntityKind k : kCarryableKinds) out.push_back({c, k});
        }
    }
    return out;
}

std::vector<ObjectDesc> held_out_pairs(Task task) {
    const auto all = target_pairs(task);
    std::vector<ObjectDesc> out;
    for (std::size_t i = 0; i < all.size(); ++i)
        if (i % 5 == 2) out.push_back(all[i]);
    return out;
}

bool is_held_out(Task task, ObjectDesc d) {
    const auto held = held_out_pairs(task);
    return std::find(held.begin(), held.end(), d) != held.end();
}

std::string mission_for(Task task, ObjectDesc target) {
    switch (task) {
        case Task::GoToLocal: return "go to the " + target.str();
        case Task::PickupLocal:
        case Task::FindObj: return "pick up the " + target.str();
        case Task::UnlockLocal: return "open the " + target.str();
    }
    return {};
}

// ---------------------------------------------------------------------------
// FullState helpers
// ---------------------------------------------------------------------------

Cell FullState::at(Position p) const {
    if (!in_bounds(p)) return Cell::wall();
    return grid[static_cast<std::size_t>(p.y * width + p.x)];
}

Position FullState::relative(int lateral, int forward) const {
    const Position f = unit_vector(dir);
    const Position r = unit_vector(turn_right(dir));
    return {agent.x + f.x * forward + r.x * lateral, agent.y + f.y * forward + r.y * lateral};
}

std::vector<ObjectDesc> FullState::entity_multiset() const {
    std::vector<ObjectDesc> out;
    for (const Cell& c : grid)
        if (auto d = c.desc()) out.push_back(*d);
    if (carrying) out.push_back(*carrying);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::vector<ObjectDesc>> FullState::room_inventory() const {
    std::vector<std::vector<ObjectDesc>> out(static_cast<std::size_t>(num_rooms));
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const Cell& c = grid[static_cast<std::size_t>(y * width + x)];
            const int r = room_of[static_cast<std::size_t>(y * width + x)];
            if (c.is_object() && r >= 0) out[static_cast<std::size_t>(r)].push_back(*c.desc());
        }
    }
    return out;
}

bool FullState::goal_reached() const {
    switch (task) {
        case Task::GoToLocal: {
            const auto d = at(front()).desc();
            return d && *d == target;
        }
        case Task::PickupLocal:
        case Task::FindObj: return carrying && *carrying == target;
        case Task::UnlockLocal:
            for (const Cell& c : grid)
                if (c.type == CellType::door && c.color == target.color && c.door == DoorState::open) return true;
            return false;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Perception
// ---------------------------------------------------------------------------

Position view_to_world(const FullState& s, int vx, int vy) {
    return s.relative(vx - kViewHalf, kViewDepth - vy);
}

ViewMask compute_visibility(const FullState& s) {
    ViewMask mask{};
    std::array<std::array<bool, kViewSize>, kViewSize> opaque{};
    for (int vy = 0; vy < kViewSize; ++vy)
        for (int vx = 0; vx < kViewSize; ++vx) opaque[vy][vx] = s.at(view_to_world(s, vx, vy)).opaque();

    mask[kViewDepth][kViewHalf] = true;
    for (int j = kViewDepth; j >= 0; --j) {
        for (int i = 0; i < kViewSize - 1; ++i) {
            if (!mask[j][i] || opaque[j][i]) continue;
            mask[j][i + 1] = true;
            if (j > 0) {
                mask[j - 1][i + 1] = true;
                mask[j - 1][i] = true;
            }
        }
        for (int i = kViewSize - 1; i > 0; --i) {
            if (!mask[j][i] || opaque[j][i]) continue;
            mask[j][i - 1] = true;
            if (j > 0) {
                mask[j - 1][i - 1] = true;
                mask[j - 1][i] = true;
            }
        }
    }
    return mask;
}

std::vector<SeenEntity> visible_entities(const FullState& s) {
    const ViewMask mask = compute_visibility(s);
    std::vector<SeenEntity> out;
    for (int vx = 0; vx < kViewSize; ++vx) {
        for (int vy = 0; vy < kViewSize; ++vy) {
            if (!mask[vy][vx] || (vx == kViewHalf && vy == kViewDepth)) continue;
            const Cell c = s.at(view_to_world(s, vx, vy));
            if (c.type == CellType::empty || c.type == CellType::wall) continue;
            out.push_back({c, vx - kViewHalf, kViewDepth - vy});
        }
    }
    return out;
}

std::string direction_phrase(int lateral, int forward) {
    std::string out;
    if (lateral < 0) out = "left";
    if (lateral > 0) out = "right";
    if (forward > 0) out += out.empty() ? "forward" : " and forward";
    return out;
}

std::string entity_phrase(const Cell& c) {
    switch (c.type) {
        case CellType::wall: return "wall";
        case CellType::door:
            return std::string(to_string(c.door)) + " " + std::string(to_string(c.color)) + " door";
        case CellType::empty: return "no";
        default: return c.desc()->str();
    }
}

Observation render_observation(const FullState& s) {
    Observation obs;
    obs.mission = s.mission;
    obs.carrying = s.carrying;
    const ViewMask mask = compute_visibility(s);

    // Nearest wall straight ahead, left and right, unless something else is in the way.
    auto scan_wall = [&](int vx0, int vy0, int dvx, int dvy, const char* word) {
        for (int vx = vx0, vy = vy0; vx >= 0 && vy >= 0 && vx < kViewSize; vx += dvx, vy += dvy) {
            if (!mask[vy][vx]) continue;
            const Cell c = s.at(view_to_world(s, vx, vy));
            if (c.type == CellType::empty) continue;
            if (c.type == CellType::wall) {
                const int dist = std::abs(vx - kViewHalf) + (kViewDepth - vy);
                obs.view_lines.push_back("You see a wall " + plural_steps(dist) + " " + word);
            }
            return;
        }
    };
    scan_wall(kViewHalf, kViewDepth - 1, 0, -1, "forward");
    scan_wall(kViewHalf - 1, kViewDepth, -1, 0, "left");
    scan_wall(kViewHalf + 1, kViewDepth, 1, 0, "right");

    for (const SeenEntity& e : visible_entities(s)) {
        const bool open_door = e.cell.type == CellType::door && e.cell.door == DoorState::open;
        std::string line = open_door ? "You see an " : "You see a ";
        line += entity_phrase(e.cell);
        std::string where;
        if (e.lateral != 0) where = plural_steps(std::abs(e.lateral)) + (e.lateral < 0 ? " left" : " right");
        if (e.forward > 0) {
            if (!where.empty()) where += " and ";
            where += plural_steps(e.forward) + " forward";
        }
        obs.view_lines.push_back(line + " " + where);
    }
    return obs;
}

std::string Observation::text() const {
    std::string out;
    if (carrying) out = "You carry a " + carrying->str();
    for (const auto& l : view_lines) {
        if (!out.empty()) out += '\n';
        out += l;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dynamics
// ---------------------------------------------------------------------------

double apply_action(FullState& s, Action a) {
    if (s.done) throw UsageError("step called after the episode ended");
    ++s.steps;
    const Position f = s.front();
    switch (a) {
        case Action::turn_left: s.dir = turn_left(s.dir); break;
        case Action::turn_right: s.dir = turn_right(s.dir); break;
        case Action::go_forward:
            if (s.at(f).passable()) {
                s.agent = f;
                const int r = s.room_at(f);
                if (r >= 0) s.current_room = r;
            }
            break;
        case Action::pick_up:
            if (!s.carrying && s.at(f).is_object()) {
                s.carrying = s.at(f).desc();
                s.mutable_at(f) = Cell{};
            }
            break;
        case Action::drop:
            if (s.carrying && s.in_bounds(f) && s.at(f).type == CellType::empty) {
                s.mutable_at(f) = Cell::object(*s.carrying);
                s.carrying.reset();
            }
            break;
        case Action::toggle:
            if (s.in_bounds(f) && s.at(f).type == CellType::door) {
                Cell& door = s.mutable_at(f);
                if (door.door == DoorState::locked) {
                    if (s.carrying && s.carrying->kind == EntityKind::key && s.carrying->color == door.color)
                        door.door = DoorState::open;
                } else {
                    door.door = door.door == DoorState::open ? DoorState::closed : DoorState::open;
                }
            }
            break;
    }
    s.success = s.goal_reached();
    s.done = s.success || s.steps >= s.max_steps;
    return s.success ? success_reward(s.steps, s.max_steps) : 0.0;
}

// ---------------------------------------------------------------------------
// Solvability planner
// ---------------------------------------------------------------------------

std::optional<std::vector<Action>> plan_solution(const FullState& start, int max_nodes) {
    if (start.goal_reached()) return std::vector<Action>{};

    std::vector<Position> doors;
    std::vector<Position> useful;  // objects the plan may pick up
    for (int y = 0; y < start.height; ++y) {
        for (int x = 0; x < start.width; ++x) {
            const Cell& c = start.grid[static_cast<std::size_t>(y * start.width + x)];
            if (c.type == CellType::door) doors.push_back({x, y});
            if (!c.is_object()) continue;
            const bool wanted = start.task == Task::UnlockLocal ? c.type == CellType::key
                                                                : (start.task != Task::GoToLocal && *c.desc() == start.target);
            if (wanted) useful.push_back({x, y});
        }
    }
    if (doors.size() > 24 || useful.size() > 30) return std::nullopt;

    // carry: 0 = the item held at start (or nothing), k+1 = useful[k]
    struct Node {
        Position pos;
        Direction dir;
        int carry;
        std::uint32_t opened;
    };
    const auto encode = [&](const Node& n) {
        std::uint64_t v = static_cast<std::uint64_t>(n.pos.y * start.width + n.pos.x);
        v = v * 4 + static_cast<std::uint64_t>(n.dir);
        v = v * (useful.size() + 1) + static_cast<std::uint64_t>(n.carry);
        return (v << doors.size()) | n.opened;
    };
    const auto door_index = [&](Position p) {
        for (std::size_t i = 0; i < doors.size(); ++i)
            if (doors[i] == p) return static_cast<int>(i);
        return -1;
    };
    const auto carried_desc = [&](const Node& n) -> std::optional<ObjectDesc> {
        if (n.carry == 0) return start.carrying;
        return start.at(useful[static_cast<std::size_t>(n.carry - 1)]).desc();
    };
    const auto cell_in = [&](const Node& n, Position p) {
        Cell c = start.at(p);
        if (n.carry > 0 && useful[static_cast<std::size_t>(n.carry - 1)] == p) return Cell{};
        if (c.type == CellType::door) {
            const int di = door_index(p);
            if (di >= 0 && (n.opened >> di) & 1U) c.door = DoorState::open;
        }
        return c;
    };
    const auto is_goal = [&](const Node& n) {
        switch (start.task) {
            case Task::GoToLocal: {
                const auto d = cell_in(n, step_towards(n.pos, n.dir)).desc();
                return d && *d == start.target;
            }
            case Task::PickupLocal:
            case Task::FindObj: {
                const auto d = carried_desc(n);
                return d && *d == start.target;
            }
            case Task::UnlockLocal:
                for (std::size_t i = 0; i < doors.size(); ++i) {
                    const Cell c = cell_in(n, doors[i]);
                    if (c.color == start.target.color && c.door == DoorState::open) return true;
                }
                return false;
        }
        return false;
    };

    std::unordered_map<std::uint64_t, std::pair<std::uint64_t, Action>> parent;
    std::unordered_map<std::uint64_t, Node> nodes;
    std::deque<std::uint64_t> queue;
    const Node root{start.agent, start.dir, 0, 0};
    const std::uint64_t root_id = encode(root);
    parent.emplace(root_id, std::make_pair(root_id, Action::turn_left));
    nodes.emplace(root_id, root);
    queue.push_back(root_id);

    while (!queue.empty()) {
        if (static_cast<int>(nodes.size()) > max_nodes) return std::nullopt;
        const std::uint64_t id = queue.front();
        queue.pop_front();
        const Node n = nodes.at(id);
        const Position f = step_towards(n.pos, n.dir);
        const Cell fc = cell_in(n, f);
        for (Action a : kAllActions) {
            Node m = n;
            bool changed = true;
            switch (a) {
                case Action::turn_left: m.dir = turn_left(n.dir); break;
                case Action::turn_right: m.dir = turn_right(n.dir); break;
                case Action::go_forward:
                    changed = fc.passable();
                    if (changed) m.pos = f;
                    break;
                case Action::pick_up: {
                    changed = false;
                    if (carried_desc(n)) break;
                    for (std::size_t k = 0; k < useful.size(); ++k) {
                        if (useful[k] == f && fc.is_object()) {
                            m.carry = static_cast<int>(k) + 1;
                            changed = true;
                        }
                    }
                    break;
                }
                case Action::drop: changed = false; break;
                case Action::toggle: {
                    changed = false;
                    if (fc.type != CellType::door || fc.door == DoorState::open) break;
                    const auto held = carried_desc(n);
                    const bool can_open = fc.door == DoorState::closed ||
                                          (held && held->kind == EntityKind::key && held->color == fc.color);
                    if (can_open) {
                        m.opened |= 1U << door_index(f);
                        changed = true;
                    }
                    break;
                }
            }
            if (!changed) continue;
            const std::uint64_t mid = encode(m);
            if (parent.count(mid)) continue;
            parent.emplace(mid, std::make_pair(id, a));
            nodes.emplace(mid, m);
            if (is_goal(m)) {
                std::vector<Action> plan;
                for (std::uint64_t cur = mid; cur != root_id; cur = parent.at(cur).first)
                    plan.push_back(parent.at(cur).second);
                std::reverse(plan.begin(), plan.end());
                return plan;
            }
            queue.push_back(mid);
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Environment
// ---------------------------------------------------------------------------

Environment::Environment(TaskSpec spec, std::uint64_t seed) : spec_(std::move(spec)), seed_(seed) {
    spec_.validate();
    generate();
    reset();
}

void Environment::generate() {
    Rng rng(mix64(seed_ ^ mix64(static_cast<std::uint64_t>(spec_.task) + 0x5eed)));
    const int rs = spec_.room_size;
    const int width = (rs - 1) * spec_.room_cols + 1;
    const int height = (rs - 1) * spec_.room_rows + 1;
    const int rooms = spec_.room_rows * spec_.room_cols;

    std::vector<ObjectDesc> pool;
    if (spec_.target) {
        pool = {*spec_.target};
    } else {
        for (ObjectDesc d : target_pairs(spec_.task))
            if (is_held_out(spec_.task, d) == (spec_.split == Split::new_object)) pool.push_back(d);
    }
    std::vector<ObjectDesc> distractor_pool;
    for (ObjectDesc d : target_pairs(Task::GoToLocal))
        if (!is_held_out(Task::GoToLocal, d)) distractor_pool.push_back(d);

    std::string last_failure = "no attempt made";
    for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
        FullState s;
        s.task = spec_.task;
        s.max_steps = spec_.max_steps;
        s.seed = seed_;
        s.width = width;
        s.height = height;
        s.num_rooms = rooms;
        s.grid.assign(static_cast<std::size_t>(width * height), Cell{});
        s.room_of.assign(static_cast<std::size_t>(width * height), -1);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const std::size_t i = static_cast<std::size_t>(y * width + x);
                if (x % (rs - 1) == 0 || y % (rs - 1) == 0) {
                    s.grid[i] = Cell::wall();
                } else {
                    s.room_of[i] = (y / (rs - 1)) * spec_.room_cols + x / (rs - 1);
                }
            }
        }

        s.target = rng.pick(pool);
        s.mission = mission_for(s.task, s.target);

        // Doors between neighbouring rooms.
        if (spec_.task == Task::UnlockLocal) {
            const int y = rng.range(1, rs - 2);
            s.mutable_at({rs - 1, y}) = Cell::make_door(s.target.color, DoorState::locked);
        } else if (rooms > 1) {
            for (int r = 0; r < spec_.room_rows; ++r) {
                for (int c = 0; c < spec_.room_cols; ++c) {
                    if (c + 1 < spec_.room_cols) {
                        const Position p{(c + 1) * (rs - 1), r * (rs - 1) + rng.range(1, rs - 2)};
                        s.mutable_at(p) = Cell::make_door(kAllColors[rng.below(kAllColors.size())],
                                                          DoorState::closed);
                    }
                    if (r + 1 < spec_.room_rows) {
                        const Position p{c * (rs - 1) + rng.range(1, rs - 2), (r + 1) * (rs - 1)};
                        s.mutable_at(p) = Cell::make_door(kAllColors[rng.below(kAllColors.size())],
                                                          DoorState::closed);
                    }
                }
            }
        }

        auto random_free_cell = [&](int room) -> std::optional<Position> {
            const int r0 = room / spec_.room_cols;
            const int c0 = room % spec_.room_cols;
            for (int tries = 0; tries < 100; ++tries) {
                const Position p{c0 * (rs - 1) + rng.range(1, rs - 2), r0 * (rs - 1) + rng.range(1, rs - 2)};
                if (s.at(p).type == CellType::empty && p != s.agent) return p;
            }
            return std::nullopt;
        };

        const int start_room = spec_.task == Task::FindObj ? static_cast<int>(rng.below(static_cast<std::uint64_t>(rooms))) : 0;
        s.agent = {-1, -1};
        auto agent_cell = random_free_cell(start_room);
        if (!agent_cell) {
            last_failure = "no free cell for the agent";
            continue;
        }
        s.agent = *agent_cell;
        s.dir = static_cast<Direction>(rng.below(4));
        s.current_room = start_room;

        bool placed = true;
        if (spec_.task == Task::UnlockLocal) {
            auto k = random_free_cell(start_room);
            if (k) s.mutable_at(*k) = Cell::object({s.target.color, EntityKind::key});
            placed = k.has_value();
            if (!placed) last_failure = "no legal key placement";
        } else {
            int target_room = start_room;
            if (spec_.task == Task::FindObj) {
                target_room = static_cast<int>(rng.below(static_cast<std::uint64_t>(rooms - 1)));
                if (target_room >= start_room) ++target_room;
            }
            auto t = random_free_cell(target_room);
            if (t) s.mutable_at(*t) = Cell::object(s.target);
            placed = t.has_value();
            if (!placed) last_failure = "no legal target placement";
        }
        for (int d = 0; placed && d < spec_.distractors; ++d) {
            ObjectDesc obj = rng.pick(distractor_pool);
            const ObjectDesc excluded = spec_.task == Task::UnlockLocal ? ObjectDesc{s.target.color, EntityKind::key}
                                                                       : s.target;
            while (obj == excluded) obj = rng.pick(distractor_pool);
            const int room = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec_.task == Task::UnlockLocal ? 1 : rooms)));
            auto p = random_free_cell(room);
            if (!p) {
                placed = false;
                last_failure = "no free cell for distractor " + std::to_string(d);
                break;
            }
            s.mutable_at(*p) = Cell::object(obj);
        }
        if (!placed) continue;
        if (s.goal_reached()) {
            last_failure = "goal satisfied at the start pose";
            continue;
        }
        if (!plan_solution(s)) {
            last_failure = "layout not solvable by the planner";
            continue;
        }
        initial_ = std::move(s);
        return;
    }
    throw GenerationError("layout generation for " + std::string(to_string(spec_.task)) + " seed " +
                          std::to_string(seed_) + " failed after " + std::to_string(kMaxGenerationAttempts) +
                          " attempts: " + last_failure);
}

Observation Environment::reset() {
    state_ = initial_;
    traversals_.clear();
    visited_rooms_ = {state_.current_room};
    return render_text();
}

StepResult Environment::step(Action a) {
    if (state_.done) throw UsageError("step called after the episode ended");
    const int prev_room = state_.current_room;
    const Position prev_pos = state_.agent;
    StepResult r;
    r.reward = apply_action(state_, a);
    if (state_.current_room != prev_room) {
        traversals_.push_back({state_.steps, prev_room, state_.current_room, prev_pos});
        if (std::find(visited_rooms_.begin(), visited_rooms_.end(), state_.current_room) == visited_rooms_.end())
            visited_rooms_.push_back(state_.current_room);
    }
    r.done = state_.done;
    r.success = state_.success;
    r.observation = render_text();
    return r;
}

// ---------------------------------------------------------------------------
// Snapshots
// ---------------------------------------------------------------------------

namespace {

std::string cell_token(const Cell& c) {
    switch (c.type) {
        case CellType::empty: return ".";
        case CellType::wall: return "#";
        case CellType::door:
            return "door:" + std::string(to_string(c.color)) + ":" + std::string(to_string(c.door));
        default: return std::string(to_string(c.desc()->kind)) + ":" + std::string(to_string(c.color));
    }
}

Cell cell_from_token(const std::string& t) {
    if (t == ".") return {};
    if (t == "#") return Cell::wall();
    const auto a = t.find(':');
    if (a == std::string::npos) throw LoadError("bad cell token '" + t + "'");
    const auto kind = parse_kind(t.substr(0, a));
    const auto b = t.find(':', a + 1);
    const auto color = parse_color(t.substr(a + 1, b == std::string::npos ? std::string::npos : b - a - 1));
    if (!kind || !color) throw LoadError("bad cell token '" + t + "'");
    if (*kind == EntityKind::door) {
        if (b == std::string::npos) throw LoadError("door token without state '" + t + "'");
        const auto st = parse_door_state(t.substr(b + 1));
        if (!st) throw LoadError("bad door state in '" + t + "'");
        return Cell::make_door(*color, *st);
    }
    return Cell::object({*color, *kind});
}

json spec_to_json(const TaskSpec& s) {
    json j{{"task", to_string(s.task)},   {"split", to_string(s.split)},       {"room_rows", s.room_rows},
           {"room_cols", s.room_cols},    {"room_size", s.room_size},          {"distractors", s.distractors},
           {"max_steps", s.max_steps}};
    j["target"] = s.target ? json(s.target->str()) : json(nullptr);
    return j;
}

TaskSpec spec_from_json(const json& j) {
    TaskSpec s;
    const auto task = parse_task(j.at("task").get<std::string>());
    const auto split = parse_split(j.at("split").get<std::string>());
    if (!task || !split) throw LoadError("bad task spec in snapshot");
    s.task = *task;
    s.split = *split;
    s.room_rows = j.at("room_rows").get<int>();
    s.room_cols = j.at("room_cols").get<int>();
    s.room_size = j.at("room_size").get<int>();
    s.distractors = j.at("distractors").get<int>();
    s.max_steps = j.at("max_steps").get<int>();
    if (!j.at("target").is_null()) s.target = parse_object_desc(j.at("target").get<std::string>());
    return s;
}

}  // namespace

json state_to_json(const FullState& s) {
    json grid = json::array();
    json rooms = json::array();
    for (int y = 0; y < s.height; ++y) {
        json row = json::array();
        json rrow = json::array();
        for (int x = 0; x < s.width; ++x) {
            row.push_back(cell_token(s.at({x, y})));
            rrow.push_back(s.room_at({x, y}));
        }
        grid.push_back(std::move(row));
        rooms.push_back(std::move(rrow));
    }
    return json{{"task", to_string(s.task)},
                {"target", s.target.str()},
                {"mission", s.mission},
                {"max_steps", s.max_steps},
                {"seed", s.seed},
                {"width", s.width},
                {"height", s.height},
                {"grid", std::move(grid)},
                {"rooms", std::move(rooms)},
                {"num_rooms", s.num_rooms},
                {"agent", {{"x", s.agent.x}, {"y", s.agent.y}, {"dir", to_string(s.dir)}}},
                {"carrying", s.carrying ? json(s.carrying->str()) : json(nullptr)},
                {"current_room", s.current_room},
                {"steps", s.steps},
                {"done", s.done},
                {"success", s.success}};
}

FullState state_from_json(const json& j) {
    FullState s;
    try {
        const auto task = parse_task(j.at("task").get<std::string>());
        const auto target = parse_object_desc(j.at("target").get<std::string>());
        if (!task || !target) throw LoadError("bad task or target");
        s.task = *task;
        s.target = *target;
        s.mission = j.at("mission").get<std::string>();
        s.max_steps = j.at("max_steps").get<int>();
        s.seed = j.at("seed").get<std::uint64_t>();
        s.width = j.at("width").get<int>();
        s.height = j.at("height").get<int>();
        s.num_rooms = j.at("num_rooms").get<int>();
        const auto& grid = j.at("grid");
        const auto& rooms = j.at("rooms");
        if (static_cast<int>(grid.size()) != s.height || static_cast<int>(rooms.size()) != s.height)
            throw LoadError("grid height mismatch");
        for (int y = 0; y < s.height; ++y) {
            if (static_cast<int>(grid[y].size()) != s.width || static_cast<int>(rooms[y].size()) != s.width)
                throw LoadError("grid width mismatch in row " + std::to_string(y));
            for (int x = 0; x < s.width; ++x) {
                s.grid.push_back(cell_from_token(grid[y][x].get<std::string>()));
                s.room_of.push_back(rooms[y][x].get<int>());
            }
        }
        const auto& a = j.at("agent");
        s.agent = {a.at("x").get<int>(), a.at("y").get<int>()};
        const std::string dir = a.at("dir").get<std::string>();
        bool found = false;
        for (int d = 0; d < 4; ++d) {
            if (to_string(static_cast<Direction>(d)) == dir) {
                s.dir = static_cast<Direction>(d);
                found = true;
            }
        }
        if (!found) throw LoadError("bad agent direction '" + dir + "'");
        if (!j.at("carrying").is_null()) s.carrying = parse_object_desc(j.at("carrying").get<std::string>());
        s.current_room = j.at("current_room").get<int>();
        s.steps = j.at("steps").get<int>();
        s.done = j.at("done").get<bool>();
        s.success = j.at("success").get<bool>();
    } catch (const json::exception& e) {
        throw LoadError(std::string("malformed state snapshot: ") + e.what());
    }
    return s;
}

json Environment::snapshot() const {
    return json{{"format", "aec-layout"}, {"version", 1},         {"seed", seed_},
                {"spec", spec_to_json(spec_)}, {"initial", state_to_json(initial_)},
                {"current", state_to_json(state_)}};
}

Environment Environment::from_snapshot(const json& j) {
    if (j.value("format", std::string()) != "aec-layout") throw LoadError("not a layout snapshot");
    if (j.value("version", 0) != 1) throw LoadError("unsupported layout snapshot version");
    Environment env;
    try {
        env.spec_ = spec_from_json(j.at("spec"));
        env.seed_ = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw LoadError(std::string("malformed layout snapshot: ") + e.what());
    }
    env.initial_ = state_from_json(j.at("initial"));
    env.reset();
    env.state_ = state_from_json(j.at("current"));
    return env;
}

}  // namespace aec
