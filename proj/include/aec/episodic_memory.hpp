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

// Episodic memory: (state key, action) -> highest return ever observed.
//
// Steps are buffered during an episode; once it ends the buffer is sealed,
// discounted returns are computed backwards and each pair's stored value is
// raised to the new return if it is higher. Retrieval is exact key equality.

#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "aec/encoder.hpp"

namespace aec {

inline constexpr int kMemoryFormatVersion = 1;

struct TransitionRecord {
    int t = 0;
    CanonicalKey key;
    Action action = Action::turn_left;
    double reward = 0.0;
};

class EpisodeBuffer {
public:
    EpisodeBuffer();

    /// Appends with the next step index. Throws UsageError once sealed.
    void record(CanonicalKey key, Action action, double reward);
    void seal() { sealed_ = true; }
    bool sealed() const { return sealed_; }
    const std::vector<TransitionRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    /// Process-unique id; copies share it, so a copy counts as the same episode.
    std::uint64_t id() const { return id_; }

private:
    std::uint64_t id_;
    std::vector<TransitionRecord> records_;
    bool sealed_ = false;
};

struct ReturnRecord {
    CanonicalKey key;
    Action action = Action::turn_left;
    double value = 0.0;
};

/// R_t = r_t + gamma * R_{t+1}, one entry per record in buffer order.
/// Throws UsageError if the buffer is not sealed or gamma is outside [0, 1].
std::vector<ReturnRecord> compute_returns(const EpisodeBuffer& buffer, double gamma);

struct EpisodicEntry {
    CanonicalKey key;
    std::array<std::optional<double>, kNumActions> values{};
    std::array<std::uint32_t, kNumActions> visits{};

    std::optional<double> value(Action a) const { return values[static_cast<std::size_t>(a)]; }
    bool empty() const;
    bool operator==(const EpisodicEntry&) const = default;
};

/// Highest-valued action, ties going to the earlier action in the fixed order.
std::optional<std::pair<Action, double>> best_action(const EpisodicEntry& entry);

struct MemoryMetadata {
    std::string task;
    double gamma = 0.99;
    std::string created;  ///< ISO-8601 UTC
    std::string canonical_form{kCanonicalFormVersion};
    /// Tasks whose experience is in this memory (grows on import).
    std::vector<std::string> origin_tasks;

    bool operator==(const MemoryMetadata&) const = default;
};

struct CommitStats {
    std::size_t inserts = 0;
    std::size_t raises = 0;
    std::size_t noops = 0;
    std::size_t evictions = 0;
};

struct MergeStats {
    std::size_t new_keys = 0;
    std::size_t new_pairs = 0;
    std::size_t raised = 0;
    std::size_t kept = 0;
};

/// One writer, many readers: commit and import take an exclusive lock,
/// lookups a shared one, so readers see either the pre- or post-commit table.
class EpisodicMemory {
public:
    explicit EpisodicMemory(MemoryMetadata meta = {}, std::optional<std::size_t> max_entries = std::nullopt);
    EpisodicMemory(const EpisodicMemory& other);
    EpisodicMemory& operator=(const EpisodicMemory& other);

    /// Static constructor stamping the current time.
    static EpisodicMemory create(std::string task, double gamma, std::optional<std::size_t> max_entries = std::nullopt);

    const MemoryMetadata& metadata() const { return meta_; }

    /// Throws ConfigError when `gamma` differs from the memory's. A buffer that
    /// was already committed is counted as all no-ops and changes nothing.
    CommitStats commit(const EpisodeBuffer& buffer, double gamma);

    /// Exact-match retrieval. Counts towards `lookup_count()`.
    std::optional<EpisodicEntry> lookup(const CanonicalKey& key) const;
    std::optional<std::pair<Action, double>> best_action(const CanonicalKey& key) const;

    /// Union by key; colliding pairs keep the larger value. Throws ConfigError on
    /// canonical-form mismatch.
    MergeStats import_foreign(const EpisodicMemory& other);

    std::size_t size() const;
    /// Number of stored (key, action) values.
    std::size_t pair_count() const;
    /// Entries sorted by key.
    std::vector<EpisodicEntry> entries() const;

    std::uint64_t lookup_count() const { return lookups_.load(std::memory_order_relaxed); }
    void reset_lookup_count() { lookups_.store(0, std::memory_order_relaxed); }

    /// Header line plus one JSON object per entry, sorted by key.
    std::string serialize() const;
    static EpisodicMemory deserialize(const std::string& text);
    void save(const std::filesystem::path& path) const;
    static EpisodicMemory load(const std::filesystem::path& path);

    /// Same metadata and same values (visit counts ignored).
    bool value_equal(const EpisodicMemory& other) const;

private:
    void touch(const CanonicalKey& key);
    std::size_t evict_over_cap();

    MemoryMetadata meta_;
    std::optional<std::size_t> max_entries_;
    std::unordered_map<CanonicalKey, EpisodicEntry> table_;
    /// Last commit sequence per key, for least-recently-committed eviction.
    std::unordered_map<CanonicalKey, std::uint64_t> last_commit_;
    std::map<std::uint64_t, CanonicalKey> by_commit_;
    std::uint64_t commit_seq_ = 0;
    std::unordered_set<std::uint64_t> committed_buffers_;
    mutable std::shared_mutex mu_;
    mutable std::atomic<std::uint64_t> lookups_{0};
};

std::string utc_now_iso8601();

}  // namespace aec
