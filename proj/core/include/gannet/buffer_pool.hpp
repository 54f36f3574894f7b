// Copyright 2025-present the gannet project
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

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

namespace gannet {

// Record-granularity cache over the index pages. One 64-bit atomic word per
// vid: MSB set means resident (low bits hold the slot index), MSB clear means
// on disk (low bits hold the page ID). Bit 62 is an internal loading flag and
// never escapes through the public decode.
//
// Slots walk Free -> Locked -> Occupied <-> Marked -> Free and nothing else.
// Payload bytes are written only while Locked; a per-slot version counter is
// odd during the write, so readers copy under a seqlock and retry on tears.

enum class SlotState : uint32_t { Free = 0, Locked = 1, Occupied = 2, Marked = 3 };

struct RecordLocation {
    bool resident;
    uint32_t value;  // slot index when resident, page ID otherwise
};

/// Decoded record copied out of a slot. Buffers are reused across fetches.
struct DecodedRecord {
    std::vector<uint8_t> extended;
    std::vector<uint32_t> adjacency;
};

struct PoolStats {
    uint64_t hits = 0;
    uint64_t misses = 0;
    uint64_t loads = 0;
    uint64_t evictions = 0;
    uint64_t cofetch_installs = 0;
    uint64_t sweeps = 0;
};

struct SlotTransition {
    uint32_t slot;
    SlotState from;
    SlotState to;
};

class BufferPool {
public:
    struct Config {
        uint32_t slot_count = 0;
        size_t extended_size = 0;    // bytes of one extended code
        uint32_t max_degree = 0;     // adjacency upper bound, sizes the slot
        double low_watermark = 0.05; // sweep_if_low target fraction of free slots
        bool co_fetch = true;        // install same-color coresidents on load
        bool record_transitions = false;  // test hook, keeps a transition log
    };

    /// directory[vid] is the page holding vid's record; defines n.
    BufferPool(const Config& cfg, std::span<const uint32_t> directory);

    uint32_t slot_count() const { return slot_count_; }
    uint32_t n() const { return n_; }
    size_t free_count();

    /// Decodes the map entry; resident entries get the second-chance touch.
    /// Counts a hit or a miss, so call once per logical access.
    RecordLocation lookup(uint32_t vid);

    /// Same decode with no touch and no stats, for retries and look-aheads.
    RecordLocation peek(uint32_t vid) const;

    enum class BeginLoad { reserved, already_loading, resident, retry_later };
    struct Reservation {
        uint32_t vid = 0;
        uint32_t page_id = 0;
        uint32_t slot = 0;
    };
    struct BeginLoadResult {
        BeginLoad status;
        Reservation reservation;  // valid only for status == reserved
    };

    /// Claims the load of an on-disk vid: flags the map entry, pops a free
    /// slot (inline eviction only when allow_evict), moves it Free -> Locked.
    /// Exactly one concurrent caller per vid wins; losers see already_loading.
    /// retry_later means no slot could be freed right now.
    BeginLoadResult begin_load(uint32_t vid, uint32_t page_id, bool allow_evict);

    /// Parses the reserved vid out of its page image, publishes the slot as
    /// Occupied, and flips the map entry to resident. With co-fetch enabled
    /// and a nonzero color, same-color coresidents are installed into free
    /// slots too (best effort, never evicts for them). The reservation is
    /// consumed even on failure; a missing or undecodable record aborts the
    /// load and throws corrupt_data.
    void complete_load(const Reservation& r, std::span<const uint8_t> page_bytes);

    /// Locked -> Free, for I/O failures. The map entry returns to on-disk.
    void abort_load(const Reservation& r);

    /// Seqlock copy-out of slot's payload, succeeding only if the slot still
    /// holds vid in a readable state for the whole copy. False means evicted
    /// or reused; the caller restarts from lookup.
    bool try_read(uint32_t vid, uint32_t slot, DecodedRecord& out) const;

    /// Clock sweep with second chance: Occupied -> Marked on first visit,
    /// Marked -> Free on the next, Locked and Free skipped. Stops after
    /// freeing target_free slots or two full revolutions. May free fewer.
    uint32_t evict(uint32_t target_free);

    /// Runs evict when the free list has dropped under the low watermark,
    /// keeping headroom for prefetch and co-fetch installs.
    void sweep_if_low();

    PoolStats stats() const;
    SlotState slot_state(uint32_t slot) const;
    std::vector<SlotTransition> drain_transition_log();

private:
    static constexpr uint64_t kResidentBit = 1ULL << 63;
    static constexpr uint64_t kLoadingBit = 1ULL << 62;
    static constexpr uint64_t kValueMask = (1ULL << 62) - 1;

    bool transition(uint32_t slot, SlotState from, SlotState to);
    std::optional<uint32_t> pop_free();
    void push_free(uint32_t slot);
    void install(uint32_t slot, uint32_t vid, uint32_t page_id,
                 std::span<const uint8_t> extended, std::span<const uint32_t> adjacency);
    uint8_t* payload(uint32_t slot) { return payload_.get() + stride_ * slot; }
    const uint8_t* payload(uint32_t slot) const { return payload_.get() + stride_ * slot; }

    uint32_t slot_count_;
    uint32_t n_;
    size_t extended_size_;
    uint32_t max_degree_;
    size_t stride_;
    uint32_t watermark_slots_;
    bool co_fetch_;
    bool record_transitions_;

    std::unique_ptr<std::atomic<uint64_t>[]> map_;
    std::unique_ptr<std::atomic<uint32_t>[]> states_;
    std::unique_ptr<std::atomic<uint64_t>[]> versions_;
    std::unique_ptr<std::atomic<uint32_t>[]> slot_vids_;
    std::unique_ptr<std::atomic<uint32_t>[]> slot_pages_;  // for map restore on evict
    std::unique_ptr<uint8_t[]> payload_;

    std::mutex free_mutex_;
    std::vector<uint32_t> free_list_;  // LIFO
    std::atomic<uint64_t> clock_hand_{0};

    struct Counters {
        std::atomic<uint64_t> hits{0};
        std::atomic<uint64_t> misses{0};
        std::atomic<uint64_t> loads{0};
        std::atomic<uint64_t> evictions{0};
        std::atomic<uint64_t> cofetch_installs{0};
        std::atomic<uint64_t> sweeps{0};
    } counters_;

    std::mutex log_mutex_;
    std::vector<SlotTransition> transition_log_;
};

}  // namespace gannet
