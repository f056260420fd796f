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

#include "aec/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "aec/llm_client.hpp"
#include "aec/prompts.hpp"

namespace aec {

namespace {

bool has_digit(std::string_view s) {
    return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
}

bool is_direction_phrase(std::string_view s) {
    return std::find(kDirectionPhrases.begin(), kDirectionPhrases.end(), s) != kDirectionPhrases.end();
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::optional<bool> parse_yes_no(std::string_view s) {
    std::string v = to_lower(trim(s));
    while (!v.empty() && (v.back() == '.' || v.back() == '"')) v.pop_back();
    while (!v.empty() && v.front() == '"') v.erase(v.begin());
    if (v == "yes") return true;
    if (v == "no") return false;
    return std::nullopt;
}

std::string value_after_colon(const std::string& line) {
    const auto c = line.find(':');
    return c == std::string::npos ? std::string() : trim(std::string_view(line).substr(c + 1));
}

}  // namespace

std::string_view to_string(Probe p) {
    switch (p) {
        case Probe::forward: return "forward";
        case Probe::left: return "left";
        case Probe::right: return "right";
    }
    return "";
}

std::optional<std::string> normalize_entity(std::string_view text) {
    std::string v = squash_spaces(to_lower(text));
    for (std::string_view article : {"a ", "an ", "the "})
        if (v.rfind(article, 0) == 0) v = v.substr(article.size());
    if (v == "wall") return v;
    if (auto d = parse_object_desc(v); d && d->kind != EntityKind::door) return d->str();
    // Doors: "<state> <color> door" or "<color> <state> door".
    std::istringstream in(v);
    std::vector<std::string> words;
    for (std::string w; in >> w;) words.push_back(w);
    if (words.size() == 3 && words[2] == "door") {
        auto s0 = parse_door_state(words[0]);
        auto c1 = parse_color(words[1]);
        auto c0 = parse_color(words[0]);
        auto s1 = parse_door_state(words[1]);
        if (s0 && c1) return std::string(to_string(*s0)) + " " + std::string(to_string(*c1)) + " door";
        if (c0 && s1) return std::string(to_string(*s1)) + " " + std::string(to_string(*c0)) + " door";
    }
    return std::nullopt;
}

void StateKey::validate() const {
    for (const auto& d : target_directions) {
        if (has_digit(d)) throw ParseError("numbers are not allowed in direction phrases", d);
        if (!is_direction_phrase(d)) throw ParseError("unknown direction phrase", d);
    }
    for (const auto& o : obstacles) {
        if (!o) continue;
        const auto norm = normalize_entity(*o);
        if (!norm || *norm != *o) throw ParseError("obstacle is not a canonical entity phrase", *o);
    }
}

// ---------------------------------------------------------------------------
// Canonical form
// ---------------------------------------------------------------------------

CanonicalKey canonicalize(const StateKey& key) {
    std::string out;
    for (std::size_t i = 0; i < key.target_directions.size(); ++i) {
        if (i) out += ',';
        out += key.target_directions[i];
    }
    out += ';';
    out += key.carrying ? "yes" : "no";
    out += ';';
    for (std::size_t i = 0; i < key.obstacles.size(); ++i) {
        if (i) out += ',';
        out += key.obstacles[i] ? *key.obstacles[i] : "no";
    }
    out += ';';
    out += key.target_one_step_forward ? "yes" : "no";
    return {to_lower(out)};
}

StateKey decanonicalize(const CanonicalKey& key) {
    const auto fields = split(key.value, ';');
    if (fields.size() != 4) throw ParseError("canonical key needs 4 fields", key.value);
    StateKey k;
    if (!fields[0].empty())
        for (auto& d : split(fields[0], ',')) k.target_directions.push_back(d);
    const auto carrying = parse_yes_no(fields[1]);
    const auto t1f = parse_yes_no(fields[3]);
    const auto obstacles = split(fields[2], ',');
    if (!carrying || !t1f || obstacles.size() != 3) throw ParseError("malformed canonical key", key.value);
    k.carrying = *carrying;
    k.target_one_step_forward = *t1f;
    for (std::size_t i = 0; i < 3; ++i)
        if (obstacles[i] != "no") k.obstacles[i] = obstacles[i];
    k.validate();
    return k;
}

// ---------------------------------------------------------------------------
// Prompt and parsing
// ---------------------------------------------------------------------------

EncoderInput make_encoder_input(const Observation& obs, Task task) {
    std::string raw = obs.text();
    if (raw.empty()) raw = "You see nothing in front of you";
    return {prompts::game_description(task), std::move(raw), obs.mission};
}

std::string build_encoder_prompt(const EncoderInput& input) {
    if (input.env_description.empty()) throw UsageError("encoder input is missing the environment description");
    if (input.raw_state.empty()) throw UsageError("encoder input is missing the observation");
    if (input.task_instruction.empty()) throw UsageError("encoder input is missing the mission");
    return prompts::render(prompts::encoder_template(), {{"Environment description", input.env_description},
                                                         {"Mission", input.task_instruction},
                                                         {"observation", input.raw_state},
                                                         {"Format requirements", std::string(prompts::encoder_format())}});
}

std::string format_encoder_output(const StateKey& key, const std::optional<ObjectDesc>& current) {
    std::string out = "STEP 0 - Current target: " + (current ? current->str() : std::string("unknown")) + "\n";
    out += "STEP 1 - Output list: ";
    if (key.target_directions.empty()) out += "none";
    for (std::size_t i = 0; i < key.target_directions.size(); ++i) {
        if (i) out += ", ";
        out += "target " + key.target_directions[i];
    }
    out += "\nSTEP 2 - Carrying: ";
    out += key.carrying ? "yes" : "no";
    out += "\nSTEP 3 - Obstacles: ";
    for (Probe p : kAllProbes) {
        if (p != Probe::forward) out += "; ";
        out += std::string(to_string(p)) + ": " + key.obstacle(p).value_or("no");
    }
    out += "\nSTEP 4 - Target 1 step forward: ";
    out += key.target_one_step_forward ? "yes" : "no";
    return out;
}

StateKey parse_encoder_output(std::string_view text) {
    std::array<std::optional<std::string>, 5> step_lines;
    std::istringstream in{std::string(text)};
    for (std::string raw; std::getline(in, raw);) {
        std::string line = trim(raw);
        // Tolerate markdown bullets and emphasis around the step label.
        while (!line.empty() && (line.front() == '*' || line.front() == '-' || line.front() == '#'))
            line = trim(std::string_view(line).substr(1));
        if (!starts_with_ci(line, "step ") || line.size() < 6) continue;
        const char n = line[5];
        if (n < '0' || n > '4') continue;
        if (line.find(':') == std::string::npos) continue;
        step_lines[static_cast<std::size_t>(n - '0')] = line;
    }
    for (int s = 1; s <= 4; ++s)
        if (!step_lines[static_cast<std::size_t>(s)])
            throw ParseError("missing STEP " + std::to_string(s) + " line", std::string());

    StateKey key;
    {
        const std::string& line = *step_lines[1];
        const std::string list = to_lower(value_after_colon(line));
        if (!list.empty() && list != "none" && list != "[]") {
            for (std::string item : split(list, ',')) {
                item = squash_spaces(item);
                while (!item.empty() && (item.front() == '"' || item.front() == '[')) item.erase(item.begin());
                while (!item.empty() && (item.back() == '"' || item.back() == ']' || item.back() == '.'))
                    item.pop_back();
                item = trim(item);
                if (item.rfind("target ", 0) != 0) throw ParseError("STEP 1 entry must read 'target <direction>'", line);
                const std::string phrase = trim(std::string_view(item).substr(7));
                if (has_digit(phrase)) throw ParseError("numbers are not allowed in direction phrases", line);
                if (!is_direction_phrase(phrase)) throw ParseError("unknown direction phrase '" + phrase + "'", line);
                key.target_directions.push_back(phrase);
            }
        }
    }
    {
        const std::string& line = *step_lines[2];
        const auto v = parse_yes_no(value_after_colon(line));
        if (!v) throw ParseError("STEP 2 must answer yes or no", line);
        key.carrying = *v;
    }
    {
        const std::string& line = *step_lines[3];
        const std::string body = value_after_colon(line);
        std::array<bool, 3> seen{};
        for (const std::string& part : split(body, ';')) {
            const auto c = part.find(':');
            if (c == std::string::npos) throw ParseError("STEP 3 entries must read '<direction>: <entity>'", line);
            const std::string dir = to_lower(trim(std::string_view(part).substr(0, c)));
            std::string value = to_lower(trim(std::string_view(part).substr(c + 1)));
            while (!value.empty() && (value.back() == '.' || value.back() == '"')) value.pop_back();
            std::optional<std::size_t> idx;
            for (Probe p : kAllProbes)
                if (dir == to_string(p)) idx = static_cast<std::size_t>(p);
            if (!idx) throw ParseError("unknown STEP 3 direction '" + dir + "'", line);
            seen[*idx] = true;
            if (value == "no" || value == "none" || value == "nothing" || value == "empty") continue;
            const auto ent = normalize_entity(value);
            if (!ent) throw ParseError("unknown STEP 3 entity '" + value + "'", line);
            key.obstacles[*idx] = *ent;
        }
        if (!seen[0] || !seen[1] || !seen[2]) throw ParseError("STEP 3 must cover forward, left and right", line);
    }
    {
        const std::string& line = *step_lines[4];
        const auto v = parse_yes_no(value_after_colon(line));
        if (!v) throw ParseError("STEP 4 must answer yes or no", line);
        key.target_one_step_forward = *v;
    }
    return key;
}

// ---------------------------------------------------------------------------
// Oracle
// ---------------------------------------------------------------------------

ObjectDesc current_target(const FullState& s) {
    if (s.task == Task::UnlockLocal) {
        bool door_locked = false;
        for (const Cell& c : s.grid)
            if (c.type == CellType::door && c.color == s.target.color && c.door == DoorState::locked) door_locked = true;
        const bool has_key = s.carrying && s.carrying->kind == EntityKind::key && s.carrying->color == s.target.color;
        if (door_locked && !has_key) return {s.target.color, EntityKind::key};
    }
    return s.target;
}

StateKey oracle_encode(const FullState& state, const TaskSpec& spec) {
    (void)spec;  // the state carries its own task and target
    const ObjectDesc target = current_target(state);
    StateKey key;
    for (const SeenEntity& e : visible_entities(state)) {
        const auto d = e.cell.desc();
        if (!d || *d != target) continue;
        key.target_directions.push_back(direction_phrase(e.lateral, e.forward));
        if (e.lateral == 0 && e.forward == 1) key.target_one_step_forward = true;
    }
    key.carrying = state.carrying.has_value();
    const std::array<std::pair<int, int>, 3> probes{{{0, 1}, {-1, 0}, {1, 0}}};
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const Cell c = state.at(state.relative(probes[i].first, probes[i].second));
        if (c.type != CellType::empty) key.obstacles[i] = entity_phrase(c);
    }
    return key;
}

// ---------------------------------------------------------------------------
// LLM backend
// ---------------------------------------------------------------------------

StateKey LlmEncoder::encode(const EncoderInput& input, const FullState&) {
    const std::string prompt = build_encoder_prompt(input);
    std::vector<ChatMessage> messages{{"user", prompt}};
    std::string last_error;
    for (int attempt = 0; attempt <= max_reprompts_; ++attempt) {
        std::string reply;
        try {
            reply = client_.complete(client_.make_request(messages));
        } catch (const CacheMiss&) {
            throw;  // replay must stop, not paper over a missing response
        } catch (const Error& e) {
            throw EncodeError(std::string("encoder backend failed: ") + e.what());
        }
        try {
            StateKey key = parse_encoder_output(reply);
            if (log_) log_->append({{"kind", "encoder"}, {"prompt", prompt}, {"reply", reply},
                                    {"attempt", attempt}, {"key", canonicalize(key).value}});
            return key;
        } catch (const ParseError& e) {
            last_error = e.what();
            if (log_) log_->append({{"kind", "encoder"}, {"prompt", prompt}, {"reply", reply},
                                    {"attempt", attempt}, {"error", last_error}});
            messages.push_back({"assistant", reply});
            messages.push_back({"user", "Your answer could not be parsed (" + last_error +
                                            "). Reply again using exactly the OUTPUT FORMAT lines."});
        }
    }
    throw EncodeError("encoder output unparseable after " + std::to_string(max_reprompts_) + " re-prompts: " + last_error);
}

}  // namespace aec
