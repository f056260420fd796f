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

// Seeded text gridworld with BabyAI-Text task semantics.
//
// Coordinates are (x = column, y = row) with y growing southwards. The agent
// sees a 7x7 window in front of it, standing at the bottom-centre of that
// window; opaque cells (walls, closed or locked doors) hide what is behind
// them.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aec/core.hpp"

namespace aec {

inline constexpr int kViewSize = 7;
inline constexpr int kViewDepth = kViewSize - 1;
inline constexpr int kViewHalf = kViewSize / 2;

struct Position {
    int x = 0;
    int y = 0;
    auto operator<=>(const Position&) const = default;
};

Position step_towards(Position p, Direction d, int n = 1);

enum class CellType : std::uint8_t { empty, wall, key, ball, box, door };

struct Cell {
    CellType type = CellType::empty;
    Color color = Color::red;
    DoorState door = DoorState::open;  ///< meaningful for doors only

    bool operator==(const Cell&) const = default;

    bool is_object() const {
        return type == CellType::key || type == CellType::ball || type == CellType::box;
    }
    bool passable() const {
        return type == CellType::empty || (type == CellType::door && door == DoorState::open);
    }
    bool opaque() const {
        return type == CellType::wall || (type == CellType::door && door != DoorState::open);
    }
    std::optional<ObjectDesc> desc() const;

    static Cell wall() { return {CellType::wall, Color::grey, DoorState::open}; }
    static Cell object(ObjectDesc d);
    static Cell make_door(Color c, DoorState s) { return {CellType::door, c, s}; }
};

enum class Split : std::uint8_t { no_change, new_object };
std::string_view to_string(Split s);
std::optional<Split> parse_split(std::string_view s);

struct TaskSpec {
    Task task = Task::GoToLocal;
    /// Fixed target; when empty the generator samples one from the split's pool.
    std::optional<ObjectDesc> target;
    Split split = Split::no_change;
    int room_rows = 1;
    int room_cols = 1;
    int room_size = 8;  ///< cells per room side including both walls
    int distractors = 8;
    int max_steps = 64;

    /// Defaults for each task.
    static TaskSpec make(Task task, Split split = Split::no_change);
    void validate() const;
};

/// Target pairs a task may ask for.
std::vector<ObjectDesc> target_pairs(Task task);
/// Deterministic 20% of `target_pairs(task)` reserved for New-object evaluation.
std::vector<ObjectDesc> held_out_pairs(Task task);
bool is_held_out(Task task, ObjectDesc d);

std::string mission_for(Task task, ObjectDesc target);

struct Observation {
    std::string mission;
    std::vector<std::string> view_lines;
    std::optional<ObjectDesc> carrying;

    bool operator==(const Observation&) const = default;
    /// Carry line (when holding something) followed by view lines, newline-separated.
    std::string text() const;
};

struct StepResult {
    Observation observation;
    double reward = 0.0;
    bool done = false;
    bool success = false;
};

/// A completed move from one room into another.
struct RoomTraversal {
    int step = 0;
    int from_room = -1;
    int to_room = -1;
    Position door;
};

/// Complete simulator state. Never handed to the LLM path.
struct FullState {
    Task task = Task::GoToLocal;
    ObjectDesc target;
    std::string mission;
    int max_steps = 64;
    std::uint64_t seed = 0;

    int width = 0;
    int height = 0;
    std::vector<Cell> grid;
    /// Room index per cell; -1 for walls and door cells.
    std::vector<int> room_of;
    int num_rooms = 1;

    Position agent;
    Direction dir = Direction::north;
    std::optional<ObjectDesc> carrying;
    /// Last room whose interior the agent stood in.
    int current_room = 0;
    int steps = 0;
    bool done = false;
    bool success = false;

    bool operator==(const FullState&) const = default;

    bool in_bounds(Position p) const { return p.x >= 0 && p.y >= 0 && p.x < width && p.y < height; }
    /// Out-of-bounds reads as wall.
    Cell at(Position p) const;
    Cell& mutable_at(Position p) { return grid[static_cast<std::size_t>(p.y * width + p.x)]; }
    int room_at(Position p) const { return in_bounds(p) ? room_of[static_cast<std::size_t>(p.y * width + p.x)] : -1; }
    Position front() const { return step_towards(agent, dir); }

    /// World position of egocentric offset (lateral: + is right, forward: + is ahead).
    Position relative(int lateral, int forward) const;

    /// Multiset of objects on the grid plus the carried one, sorted.
    std::vector<ObjectDesc> entity_multiset() const;
    /// Objects (key/ball/box) lying in each room, indexed by room.
    std::vector<std::vector<ObjectDesc>> room_inventory() const;
    /// Goal predicate for the task.
    bool goal_reached() const;
};

/// 7x7 visibility mask in view coordinates: mask[vy][vx], agent at (3, 6).
using ViewMask = std::array<std::array<bool, kViewSize>, kViewSize>;

/// Row-sweep visibility propagation (upwards and sideways from the agent,
/// stopping at opaque cells).
ViewMask compute_visibility(const FullState& s);

/// World position of view cell (vx, vy).
Position view_to_world(const FullState& s, int vx, int vy);

/// One visible entity with its egocentric offsets.
struct SeenEntity {
    Cell cell;
    int lateral = 0;  ///< negative = left
    int forward = 0;
};

/// Non-wall entities visible to the agent, in rendering order (view column, then row).
std::vector<SeenEntity> visible_entities(const FullState& s);

/// Pure direction phrase for an offset, e.g. "left and forward".
std::string direction_phrase(int lateral, int forward);

/// Name used in sentences: "red ball", "locked red door", "open red door", "wall".
std::string entity_phrase(const Cell& c);

/// Renders the text observation from a state.
Observation render_observation(const FullState& s);

/// Shortest action sequence solving the task from `s`, found by BFS over
/// (pose, carried item, opened doors). Only picks up the target or keys and
/// never drops; returns nullopt when no such plan exists.
std::optional<std::vector<Action>> plan_solution(const FullState& s, int max_nodes = 2'000'000);

class Environment {
public:
    /// Generates the layout for (spec, seed). Throws GenerationError.
    Environment(TaskSpec spec, std::uint64_t seed);

    Observation reset();
    StepResult step(Action a);
    Observation render_text() const { return render_observation(state_); }
    const FullState& ground_truth() const { return state_; }
    const FullState& initial_state() const { return initial_; }
    const TaskSpec& spec() const { return spec_; }
    std::uint64_t seed() const { return seed_; }

    const std::vector<RoomTraversal>& traversals() const { return traversals_; }
    /// Rooms whose interior the agent has stood in this episode, in first-visit order.
    const std::vector<int>& visited_rooms() const { return visited_rooms_; }

    nlohmann::json snapshot() const;
    static Environment from_snapshot(const nlohmann::json& j);

private:
    Environment() = default;
    void generate();

    TaskSpec spec_;
    std::uint64_t seed_ = 0;
    FullState initial_;
    FullState state_;
    std::vector<RoomTraversal> traversals_;
    std::vector<int> visited_rooms_;
};

/// Applies one action to a state in place; shared by Environment and tests
/// that need raw transitions. Returns the reward.
double apply_action(FullState& s, Action a);

/// Success reward for finishing after `steps_used` of `max_steps`.
inline double success_reward(int steps_used, int max_steps) {
    return 1.0 - 0.9 * static_cast<double>(steps_used) / static_cast<double>(max_steps);
}

nlohmann::json state_to_json(const FullState& s);
FullState state_from_json(const nlohmann::json& j);

}  // namespace aec
