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

#include "aec/core.hpp"

#include <algorithm>
#include <cctype>

namespace aec {

namespace {

constexpr std::array<std::string_view, 6> kColorNames{"red", "green", "blue", "purple", "yellow", "grey"};
constexpr std::array<std::string_view, 5> kKindNames{"key", "ball", "box", "door", "wall"};
constexpr std::array<std::string_view, 3> kDoorStateNames{"open", "closed", "locked"};
constexpr std::array<std::string_view, 4> kTaskNames{"GoToLocal", "PickupLocal", "UnlockLocal", "FindObj"};
constexpr std::array<std::string_view, 4> kDirectionNames{"north", "east", "south", "west"};
constexpr std::array<std::string_view, 6> kActionIds{"turn_left", "turn_right", "go_forward",
                                                     "pick_up",   "drop",       "toggle"};
constexpr std::array<std::string_view, 6> kActionPhrases{"turn left", "turn right", "go forward",
                                                         "pick up",   "drop",       "toggle"};

template <typename E, std::size_t N>
std::optional<E> lookup_name(const std::array<std::string_view, N>& names, std::string_view s,
                             bool case_insensitive) {
    const std::string key = case_insensitive ? to_lower(trim(s)) : std::string(s);
    for (std::size_t i = 0; i < N; ++i) {
        const std::string name = case_insensitive ? to_lower(names[i]) : std::string(names[i]);
        if (name == key) return static_cast<E>(i);
    }
    return std::nullopt;
}

}  // namespace

std::string_view to_string(Color c) { return kColorNames[static_cast<std::size_t>(c)]; }
std::string_view to_string(EntityKind k) { return kKindNames[static_cast<std::size_t>(k)]; }
std::string_view to_string(DoorState s) { return kDoorStateNames[static_cast<std::size_t>(s)]; }
std::string_view to_string(Task t) { return kTaskNames[static_cast<std::size_t>(t)]; }
std::string_view to_string(Direction d) { return kDirectionNames[static_cast<std::size_t>(d)]; }
std::string_view action_id(Action a) { return kActionIds[static_cast<std::size_t>(a)]; }
std::string_view action_phrase(Action a) { return kActionPhrases[static_cast<std::size_t>(a)]; }

std::optional<Color> parse_color(std::string_view s) { return lookup_name<Color>(kColorNames, s, true); }
std::optional<EntityKind> parse_kind(std::string_view s) { return lookup_name<EntityKind>(kKindNames, s, true); }
std::optional<DoorState> parse_door_state(std::string_view s) {
    return lookup_name<DoorState>(kDoorStateNames, s, true);
}
std::optional<Task> parse_task(std::string_view s) { return lookup_name<Task>(kTaskNames, s, true); }

std::optional<Action> parse_action(std::string_view s) {
    std::string norm = squash_spaces(to_lower(s));
    if (auto a = lookup_name<Action>(kActionIds, norm, false)) return a;
    if (auto a = lookup_name<Action>(kActionPhrases, norm, false)) return a;
    return std::nullopt;
}

std::string ObjectDesc::str() const {
    std::string out(to_string(color));
    out += ' ';
    out += to_string(kind);
    return out;
}

std::optional<ObjectDesc> parse_object_desc(std::string_view s) {
    const std::string norm = squash_spaces(to_lower(s));
    const auto sp = norm.find(' ');
    if (sp == std::string::npos || norm.find(' ', sp + 1) != std::string::npos) return std::nullopt;
    auto c = parse_color(std::string_view(norm).substr(0, sp));
    auto k = parse_kind(std::string_view(norm).substr(sp + 1));
    if (!c || !k || *k == EntityKind::wall) return std::nullopt;
    return ObjectDesc{*c, *k};
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return out;
}

std::string trim(std::string_view s) {
    auto is_space = [](unsigned char ch) { return std::isspace(ch) != 0; };
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string squash_spaces(std::string_view s) {
    std::string out;
    bool pending = false;
    for (unsigned char ch : s) {
        if (std::isspace(ch)) {
            pending = !out.empty();
            continue;
        }
        if (pending) out += ' ';
        pending = false;
        out += static_cast<char>(ch);
    }
    return out;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    return to_lower(s.substr(0, prefix.size())) == to_lower(prefix);
}

}  // namespace aec
