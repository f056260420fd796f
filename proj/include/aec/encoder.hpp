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

// Semantic state keys: the structured, distance-free description of an
// observation that indexes episodic memory.

#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aec/gridworld.hpp"

namespace aec {

class LlmClient;
class TranscriptLog;

/// Identifies the canonical serialization below. Stored in memory files.
inline constexpr std::string_view kCanonicalFormVersion = "aec-key/1";

enum class Probe : std::uint8_t { forward, left, right };
inline constexpr std::array kAllProbes{Probe::forward, Probe::left, Probe::right};
std::string_view to_string(Probe p);

/// The five direction phrases a target entry may carry.
inline constexpr std::array<std::string_view, 5> kDirectionPhrases{"forward", "left", "right", "left and forward",
                                                                   "right and forward"};

struct StateKey {
    /// Pure direction phrases of visible target instances, in observation order.
    std::vector<std::string> target_directions;
    bool carrying = false;
    /// Entity in the adjacent forward/left/right cell, or nullopt for "no".
    std::array<std::optional<std::string>, 3> obstacles;
    bool target_one_step_forward = false;

    bool operator==(const StateKey&) const = default;

    const std::optional<std::string>& obstacle(Probe p) const { return obstacles[static_cast<std::size_t>(p)]; }

    /// Throws ParseError if a field is outside the allowed vocabulary.
    void validate() const;
};

/// Lowercase "<dirs>;<carrying>;<fwd>,<left>,<right>;<t1f>" with "," between directions.
struct CanonicalKey {
    std::string value;

    auto operator<=>(const CanonicalKey&) const = default;
};

CanonicalKey canonicalize(const StateKey& key);
/// Inverse of canonicalize; throws ParseError on malformed input.
StateKey decanonicalize(const CanonicalKey& key);

/// Normalizes an entity mention to its canonical phrase ("wall", "red ball",
/// "locked red door"); nullopt if it names nothing known.
std::optional<std::string> normalize_entity(std::string_view text);

/// The three prompt components of the encoder input.
struct EncoderInput {
    std::string env_description;
    std::string raw_state;
    std::string task_instruction;
};

EncoderInput make_encoder_input(const Observation& obs, Task task);

/// Fills the encoder template. Throws UsageError when a component is empty.
std::string build_encoder_prompt(const EncoderInput& input);

/// Renders a key in the encoder's output format (used as A.3 input and in tests).
std::string format_encoder_output(const StateKey& key, const std::optional<ObjectDesc>& current_target = std::nullopt);

/// Extracts the STEP 1-4 answers. Throws ParseError naming the offending line.
StateKey parse_encoder_output(std::string_view text);

/// The object the agent should go for now: the key while a locked target door
/// still needs it, otherwise the mission target.
ObjectDesc current_target(const FullState& s);

/// Ground-truth computation of the same record the encoder prompt asks for.
StateKey oracle_encode(const FullState& state, const TaskSpec& spec);

/// Per-state encoder backend.
class EncoderBackend {
public:
    virtual ~EncoderBackend() = default;
    /// `truth` is only read by oracle backends.
    virtual StateKey encode(const EncoderInput& input, const FullState& truth) = 0;
    virtual std::string_view name() const = 0;
};

class OracleEncoder final : public EncoderBackend {
public:
    explicit OracleEncoder(TaskSpec spec) : spec_(std::move(spec)) {}
    StateKey encode(const EncoderInput&, const FullState& truth) override { return oracle_encode(truth, spec_); }
    std::string_view name() const override { return "oracle"; }

private:
    TaskSpec spec_;
};

/// Encoder backed by a chat model. Re-prompts up to `max_reprompts` times on a
/// parse failure, then throws EncodeError.
class LlmEncoder final : public EncoderBackend {
public:
    LlmEncoder(LlmClient& client, TranscriptLog* log = nullptr, int max_reprompts = 2)
        : client_(client), log_(log), max_reprompts_(max_reprompts) {}
    StateKey encode(const EncoderInput& input, const FullState& truth) override;
    std::string_view name() const override { return "llm"; }

private:
    LlmClient& client_;
    TranscriptLog* log_;
    int max_reprompts_;
};

inline StateKey encode(const EncoderInput& input, EncoderBackend& backend, const FullState& truth) {
    return backend.encode(input, truth);
}

}  // namespace aec

template <>
struct std::hash<aec::CanonicalKey> {
    std::size_t operator()(const aec::CanonicalKey& k) const noexcept { return std::hash<std::string>{}(k.value); }
};
