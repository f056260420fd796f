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

#include <map>
#include <string>
#include <string_view>

#include "aec/core.hpp"

namespace aec::prompts {

/// Bumped whenever a template asset changes; part of every cached request.
inline constexpr std::string_view kTemplateVersion = "v1";

// Template bodies, embedded from assets/prompts/*.v1.txt at build time.
std::string_view encoder_template();
std::string_view graph_template();
std::string_view critic_template();
std::string_view explore_template();

/// Replaces each `{slot}` with its value verbatim. Slots missing from `values`
/// are left untouched; braces inside substituted values are not re-expanded.
std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values);

/// Static rules text for the GAME DESCRIPTION / Environment description slots.
std::string game_description(Task task);

// Output-format blocks appended through the {Format requirements} slot.
std::string_view encoder_format();
std::string_view graph_format();
std::string_view explore_format();

/// "turn left, turn right, go forward, pick up, drop, toggle"
std::string action_space();

}  // namespace aec::prompts
