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

#include "aec/prompts.hpp"

#include "aec/prompt_assets.hpp"  // generated

namespace aec::prompts {

std::string_view encoder_template() { return assets::kEncoder; }
std::string_view graph_template() { return assets::kGraph; }
std::string_view critic_template() { return assets::kCritic; }
std::string_view explore_template() { return assets::kExplore; }

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            const auto close = tmpl.find('}', i + 1);
            if (close != std::string_view::npos) {
                const std::string slot(tmpl.substr(i + 1, close - i - 1));
                if (auto it = values.find(slot); it != values.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += tmpl[i++];
    }
    return out;
}

std::string game_description(Task task) {
    std::string out =
        "You are an agent in a grid maze made of rooms separated by walls. Each observation lists what you "
        "can see in front of you, up to 6 steps ahead and 3 steps to either side; walls and closed doors block "
        "the view. Positions are given as step counts to your left or right and forward. "
        "Available actions: turn left, turn right, go forward, pick up (the object directly in front of you), "
        "drop (the carried object in front of you), toggle (open or close the door in front of you). "
        "You can carry one object at a time. A locked door only opens when you toggle it while carrying a key "
        "of the same color.";
    switch (task) {
        case Task::GoToLocal:
            out += " Goal: stand directly in front of, and facing, the object named in the mission.";
            break;
        case Task::PickupLocal:
            out += " Goal: pick up the object named in the mission.";
            break;
        case Task::UnlockLocal:
            out += " Goal: open the door named in the mission. It is locked, so you first need the key of the "
                   "same color.";
            break;
        case Task::FindObj:
            out += " Goal: the object named in the mission is in another room; find it and pick it up. Doors "
                   "between rooms are closed and open with toggle.";
            break;
    }
    return out;
}

std::string_view encoder_format() {
    return "Answer with exactly these five lines and nothing else:\n"
           "STEP 0 - Current target: <color> <item>\n"
           "STEP 1 - Output list: <comma-separated entries such as \"target left and forward\", or \"none\">\n"
           "STEP 2 - Carrying: <yes|no>\n"
           "STEP 3 - Obstacles: forward: <object, wall or no>; left: <object, wall or no>; right: <object, wall "
           "or no>\n"
           "STEP 4 - Target 1 step forward: <yes|no>\n"
           "Direction phrases are one of: forward, left, right, left and forward, right and forward. Do not "
           "write any numbers in them.";
}

std::string_view graph_format() {
    return "Answer with the complete updated knowledge graph and nothing else:\n"
           "Current Room: room <label>\n"
           "room A [<color> <item>, ...]\n"
           "room B [...]\n"
           "<one triplet per line, e.g.: room A, yellow locked door, room B>\n"
           "List every known room on its own line (use [] for a room with no objects), then every triplet.";
}

std::string_view explore_format() {
    return "Answer with exactly one action from the action space, written as in the list (for example: go "
           "forward), and nothing else.";
}

std::string action_space() {
    std::string out;
    for (Action a : kAllActions) {
        if (!out.empty()) out += ", ";
        out += action_phrase(a);
    }
    return out;
}

}  // namespace aec::prompts
