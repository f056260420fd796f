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

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace aec {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Contract violation by the caller (step after done, record after seal, ...).
class UsageError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Layout generation gave up; the message names the violated constraint.
class GenerationError : public Error {
public:
    using Error::Error;
};

/// Text did not follow the expected output format. `line()` is the offending line.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::string line)
        : Error(what + (line.empty() ? std::string() : ": '" + line + "'")), line_(std::move(line)) {}
    const std::string& line() const noexcept { return line_; }

private:
    std::string line_;
};

class EncodeError : public Error {
public:
    using Error::Error;
};

/// Memory or snapshot file could not be loaded.
class LoadError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

enum class Color : std::uint8_t { red, green, blue, purple, yellow, grey };
inline constexpr std::array kAllColors{Color::red, Color::green, Color::blue,
                                       Color::purple, Color::yellow, Color::grey};

enum class EntityKind : std::uint8_t { key, ball, box, door, wall };
inline constexpr std::array kCarryableKinds{EntityKind::key, EntityKind::ball, EntityKind::box};

enum class DoorState : std::uint8_t { open, closed, locked };

/// Fixed order; also the argmax tie-break order.
enum class Action : std::uint8_t { turn_left, turn_right, go_forward, pick_up, drop, toggle };
inline constexpr std::array kAllActions{Action::turn_left, Action::turn_right, Action::go_forward,
                                        Action::pick_up,   Action::drop,       Action::toggle};
inline constexpr std::size_t kNumActions = kAllActions.size();

/// Clockwise order, so turn_right is +1.
enum class Direction : std::uint8_t { north, east, south, west };
inline constexpr std::array kAllDirections{Direction::north, Direction::east, Direction::south, Direction::west};

enum class Task : std::uint8_t { GoToLocal, PickupLocal, UnlockLocal, FindObj };
inline constexpr std::array kAllTasks{Task::GoToLocal, Task::PickupLocal, Task::UnlockLocal,
                                      Task::FindObj};

std::string_view to_string(Color c);
std::string_view to_string(EntityKind k);
std::string_view to_string(DoorState s);
std::string_view to_string(Task t);
std::string_view to_string(Direction d);

/// Snake-case identifier ("go_forward"), used in files.
std::string_view action_id(Action a);
/// Natural phrase ("go forward"), used in prompts.
std::string_view action_phrase(Action a);

std::optional<Color> parse_color(std::string_view s);
std::optional<EntityKind> parse_kind(std::string_view s);
std::optional<DoorState> parse_door_state(std::string_view s);
std::optional<Task> parse_task(std::string_view s);
/// Accepts either the identifier or the phrase form, case-insensitive.
std::optional<Action> parse_action(std::string_view s);

inline Direction turn_left(Direction d) {
    return static_cast<Direction>((static_cast<int>(d) + 3) % 4);
}
inline Direction turn_right(Direction d) {
    return static_cast<Direction>((static_cast<int>(d) + 1) % 4);
}

/// A (color, kind) pair naming an object, e.g. "red ball".
struct ObjectDesc {
    Color color = Color::red;
    EntityKind kind = EntityKind::ball;

    auto operator<=>(const ObjectDesc&) const = default;
    std::string str() const;
};

std::optional<ObjectDesc> parse_object_desc(std::string_view s);

// ---------------------------------------------------------------------------
// Small string helpers shared by the parsers.
// ---------------------------------------------------------------------------

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
/// Collapses internal whitespace runs to one space and trims.
std::string squash_spaces(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);

/// SplitMix64 finalizer; used to derive independent seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace aec
