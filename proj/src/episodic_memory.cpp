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

#include "aec/episodic_memory.hpp"

#include <algorithm>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>

#include <nlohmann/json.hpp>

namespace aec {

using nlohmann::json;

namespace {
std::atomic<std::uint64_t> next_buffer_id{1};
}  // namespace

EpisodeBuffer::EpisodeBuffer() : id_(next_buffer_id.fetch_add(1, std::memory_order_relaxed)) {}

void EpisodeBuffer::record(CanonicalKey key, Action action, double reward) {
    if (sealed_) throw UsageError("record called on a sealed episode buffer");
    records_.push_back({static_cast<int>(records_.size()), std::move(key), action, reward});
}

std::vector<ReturnRecord> compute_returns(const EpisodeBuffer& buffer, double gamma) {
    if (!buffer.sealed()) throw UsageError("returns are computed only after the episode buffer is sealed");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw UsageError("gamma must lie in [0, 1]");
    const auto& recs = buffer.records();
    std::vector<ReturnRecord> out(recs.size());
    double ret = 0.0;
    for (std::size_t i = recs.size(); i-- > 0;) {
        ret = recs[i].reward + gamma * ret;
        out[i] = {recs[i].key, recs[i].action, ret};
    }
    return out;
}

bool EpisodicEntry::empty() const {
    return std::none_of(values.begin(), values.end(), [](const auto& v) { return v.has_value(); });
}

std::optional<std::pair<Action, double>> best_action(const EpisodicEntry& entry) {
    std::optional<std::pair<Action, double>> best;
    for (Action a : kAllActions) {
        const auto v = entry.value(a);
        if (v && (!best || *v > best->second)) best = std::make_pair(a, *v);
    }
    return best;
}

std::string utc_now_iso8601() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

// ---------------------------------------------------------------------------
// EpisodicMemory
// ---------------------------------------------------------------------------

EpisodicMemory::EpisodicMemory(MemoryMetadata meta, std::optional<std::size_t> max_entries)
    : meta_(std::move(meta)), max_entries_(max_entries) {
    if (meta_.origin_tasks.empty() && !meta_.task.empty()) meta_.origin_tasks.push_back(meta_.task);
}

EpisodicMemory::EpisodicMemory(const EpisodicMemory& other) {
    std::shared_lock lock(other.mu_);
    meta_ = other.meta_;
    max_entries_ = other.max_entries_;
    table_ = other.table_;
    last_commit_ = other.last_commit_;
    by_commit_ = other.by_commit_;
    commit_seq_ = other.commit_seq_;
    committed_buffers_ = other.committed_buffers_;
}

EpisodicMemory& EpisodicMemory::operator=(const EpisodicMemory& other) {
    if (this == &other) return *this;
    std::scoped_lock lock(mu_);
    std::shared_lock other_lock(other.mu_);
    meta_ = other.meta_;
    max_entries_ = other.max_entries_;
    table_ = other.table_;
    last_commit_ = other.last_commit_;
    by_commit_ = other.by_commit_;
    commit_seq_ = other.commit_seq_;
    committed_buffers_ = other.committed_buffers_;
    return *this;
}

EpisodicMemory EpisodicMemory::create(std::string task, double gamma, std::optional<std::size_t> max_entries) {
    MemoryMetadata meta;
    meta.task = std::move(task);
    meta.gamma = gamma;
    meta.created = utc_now_iso8601();
    return EpisodicMemory(std::move(meta), max_entries);
}

void EpisodicMemory::touch(const CanonicalKey& key) {
    if (!max_entries_) return;
    if (auto it = last_commit_.find(key); it != last_commit_.end()) by_commit_.erase(it->second);
    last_commit_[key] = ++commit_seq_;
    by_commit_.emplace(commit_seq_, key);
}

std::size_t EpisodicMemory::evict_over_cap() {
    std::size_t evicted = 0;
    while (max_entries_ && table_.size() > *max_entries_ && !by_commit_.empty()) {
        const auto oldest = by_commit_.begin();
        table_.erase(oldest->second);
        last_commit_.erase(oldest->second);
        by_commit_.erase(oldest);
        ++evicted;
    }
    return evicted;
}

CommitStats EpisodicMemory::commit(const EpisodeBuffer& buffer, double gamma) {
    if (gamma != meta_.gamma)
        throw ConfigError("commit gamma " + std::to_string(gamma) + " does not match memory gamma " +
                          std::to_string(meta_.gamma));
    const auto returns = compute_returns(buffer, gamma);
    CommitStats stats;
    std::unique_lock lock(mu_);
    if (!committed_buffers_.insert(buffer.id()).second) {
        stats.noops = returns.size();
        return stats;
    }
    for (const auto& r : returns) {
        auto [it, fresh] = table_.try_emplace(r.key);
        EpisodicEntry& e = it->second;
        if (fresh) e.key = r.key;
        const auto idx = static_cast<std::size_t>(r.action);
        auto& slot = e.values[idx];
        if (!slot) {
            slot = r.value;
            ++stats.inserts;
        } else if (r.value > *slot) {
            slot = r.value;
            ++stats.raises;
        } else {
            ++stats.noops;
        }
        ++e.visits[idx];
        touch(r.key);
    }
    stats.evictions = evict_over_cap();
    return stats;
}

std::optional<EpisodicEntry> EpisodicMemory::lookup(const CanonicalKey& key) const {
    lookups_.fetch_add(1, std::memory_order_relaxed);
    std::shared_lock lock(mu_);
    const auto it = table_.find(key);
    if (it == table_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::pair<Action, double>> EpisodicMemory::best_action(const CanonicalKey& key) const {
    const auto e = lookup(key);
    if (!e) return std::nullopt;
    return aec::best_action(*e);
}

MergeStats EpisodicMemory::import_foreign(const EpisodicMemory& other) {
    if (&other == this) return {};
    if (other.meta_.canonical_form != meta_.canonical_form)
        throw ConfigError("cannot import memory with canonical form '" + other.meta_.canonical_form + "' into '" +
                          meta_.canonical_form + "'");
    MergeStats stats;
    std::unique_lock lock(mu_);
    std::shared_lock other_lock(other.mu_);
    for (const auto& [key, src] : other.table_) {
        auto [it, fresh] = table_.try_emplace(key);
        EpisodicEntry& dst = it->second;
        if (fresh) {
            dst.key = key;
            ++stats.new_keys;
        }
        for (std::size_t a = 0; a < kNumActions; ++a) {
            if (!src.values[a]) continue;
            if (!dst.values[a]) {
                dst.values[a] = src.values[a];
                ++stats.new_pairs;
            } else if (*src.values[a] > *dst.values[a]) {
                dst.values[a] = src.values[a];
                ++stats.raised;
            } else {
                ++stats.kept;
            }
            dst.visits[a] += src.visits[a];
        }
        touch(key);
    }
    for (const auto& t : other.meta_.origin_tasks)
        if (std::find(meta_.origin_tasks.begin(), meta_.origin_tasks.end(), t) == meta_.origin_tasks.end())
            meta_.origin_tasks.push_back(t);
    evict_over_cap();
    return stats;
}

std::size_t EpisodicMemory::size() const {
    std::shared_lock lock(mu_);
    return table_.size();
}

std::size_t EpisodicMemory::pair_count() const {
    std::shared_lock lock(mu_);
    std::size_t n = 0;
    for (const auto& [k, e] : table_)
        for (const auto& v : e.values) n += v.has_value();
    return n;
}

std::vector<EpisodicEntry> EpisodicMemory::entries() const {
    std::vector<EpisodicEntry> out;
    {
        std::shared_lock lock(mu_);
        out.reserve(table_.size());
        for (const auto& [k, e] : table_) out.push_back(e);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
    return out;
}

bool EpisodicMemory::value_equal(const EpisodicMemory& other) const {
    if (!(meta_.canonical_form == other.meta_.canonical_form && meta_.gamma == other.meta_.gamma)) return false;
    const auto a = entries();
    const auto b = other.entries();
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].key != b[i].key || a[i].values != b[i].values) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

std::string EpisodicMemory::serialize() const {
    json header{{"format", "aec-episodic-memory"},
                {"version", kMemoryFormatVersion},
                {"canonical_form", meta_.canonical_form},
                {"task", meta_.task},
                {"gamma", meta_.gamma},
                {"created", meta_.created},
                {"origin_tasks", meta_.origin_tasks},
                {"entries", size()}};
    std::string out = header.dump() + '\n';
    for (const auto& e : entries()) {
        json values = json::object();
        json visits = json::object();
        for (Action a : kAllActions) {
            const auto i = static_cast<std::size_t>(a);
            if (!e.values[i]) continue;
            values[std::string(action_id(a))] = *e.values[i];
            visits[std::string(action_id(a))] = e.visits[i];
        }
        out += json{{"key", e.key.value}, {"values", values}, {"visits", visits}}.dump();
        out += '\n';
    }
    return out;
}

EpisodicMemory EpisodicMemory::deserialize(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& why) -> LoadError {
        return LoadError("memory line " + std::to_string(line_no) + ": " + why + " (last valid line " +
                         std::to_string(line_no - 1) + ")");
    };
    if (!std::getline(in, line)) throw LoadError("memory file is empty (no metadata header)");
    line_no = 1;
    MemoryMetadata meta;
    std::size_t expected = 0;
    try {
        const json h = json::parse(line);
        if (h.at("format").get<std::string>() != "aec-episodic-memory") throw fail("not an episodic memory file");
        if (h.at("version").get<int>() != kMemoryFormatVersion)
            throw fail("unsupported memory format version " + std::to_string(h.at("version").get<int>()));
        meta.canonical_form = h.at("canonical_form").get<std::string>();
        meta.task = h.at("task").get<std::string>();
        meta.gamma = h.at("gamma").get<double>();
        meta.created = h.at("created").get<std::string>();
        meta.origin_tasks = h.at("origin_tasks").get<std::vector<std::string>>();
        expected = h.at("entries").get<std::size_t>();
    } catch (const json::exception& e) {
        throw fail(std::string("corrupt metadata header: ") + e.what());
    }
    EpisodicMemory mem(std::move(meta));
    std::size_t count = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) throw fail("empty line");
        try {
            const json j = json::parse(line);
            EpisodicEntry e;
            e.key = CanonicalKey{j.at("key").get<std::string>()};
            for (const auto& [name, v] : j.at("values").items()) {
                const auto a = parse_action(name);
                if (!a) throw fail("unknown action '" + name + "'");
                e.values[static_cast<std::size_t>(*a)] = v.get<double>();
            }
            for (const auto& [name, v] : j.at("visits").items()) {
                const auto a = parse_action(name);
                if (!a) throw fail("unknown action '" + name + "'");
                e.visits[static_cast<std::size_t>(*a)] = v.get<std::uint32_t>();
            }
            if (mem.table_.count(e.key)) throw fail("duplicate key '" + e.key.value + "'");
            mem.table_.emplace(e.key, e);
            mem.touch(e.key);
            ++count;
        } catch (const json::exception& ex) {
            throw fail(std::string("corrupt entry: ") + ex.what());
        }
    }
    if (count != expected)
        throw LoadError("memory truncated: header announces " + std::to_string(expected) + " entries, found " +
                        std::to_string(count) + " (last valid line " + std::to_string(line_no) + ")");
    return mem;
}

void EpisodicMemory::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << serialize();
        if (!out) throw Error("cannot write memory file " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

EpisodicMemory EpisodicMemory::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open memory file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return deserialize(ss.str());
    } catch (const LoadError& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
}

}  // namespace aec
