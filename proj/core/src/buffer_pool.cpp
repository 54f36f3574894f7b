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

#include "gannet/buffer_pool.hpp"

#include <cstring>

#include "gannet/error.hpp"
#include "gannet/page.hpp"
#include "gannet/varint.hpp"

namespace gannet {

namespace {

// Slot payload: degree u16, extended code bytes, degree adjacency u32s.
constexpr size_t kDegreeBytes = 2;

size_t payload_stride(size_t extended_size, uint32_t max_degree) {
    size_t raw = kDegreeBytes + extended_size + 4ULL * max_degree;
    return (raw + 7) / 8 * 8;
}

}  // namespace

BufferPool::BufferPool(const Config& cfg, std::span<const uint32_t> directory)
    : slot_count_(cfg.slot_count),
      n_(static_cast<uint32_t>(directory.size())),
      extended_size_(cfg.extended_size),
      max_degree_(cfg.max_degree),
      stride_(payload_stride(cfg.extended_size, cfg.max_degree)),
      watermark_slots_(static_cast<uint32_t>(cfg.low_watermark * cfg.slot_count)),
      co_fetch_(cfg.co_fetch),
      record_transitions_(cfg.record_transitions) {
    if (slot_count_ == 0) {
        throw_invalid_argument("BufferPool: slot count must be positive");
    }
    if (n_ == 0) {
        throw_invalid_argument("BufferPool: empty directory");
    }
    if (max_degree_ == 0) {
        throw_invalid_argument("BufferPool: max degree must be positive");
    }

    map_ = std::make_unique<std::atomic<uint64_t>[]>(n_);
    for (uint32_t vid = 0; vid < n_; ++vid) {
        map_[vid].store(directory[vid], std::memory_order_relaxed);
    }
    states_ = std::make_unique<std::atomic<uint32_t>[]>(slot_count_);
    versions_ = std::make_unique<std::atomic<uint64_t>[]>(slot_count_);
    slot_vids_ = std::make_unique<std::atomic<uint32_t>[]>(slot_count_);
    slot_pages_ = std::make_unique<std::atomic<uint32_t>[]>(slot_count_);
    for (uint32_t i = 0; i < slot_count_; ++i) {
        states_[i].store(static_cast<uint32_t>(SlotState::Free), std::memory_order_relaxed);
        versions_[i].store(0, std::memory_order_relaxed);
        slot_vids_[i].store(UINT32_MAX, std::memory_order_relaxed);
        slot_pages_[i].store(UINT32_MAX, std::memory_order_relaxed);
    }
    payload_ = std::make_unique<uint8_t[]>(stride_ * slot_count_);

    // Pushed descending so the LIFO hands out ascending slot indices.
    free_list_.reserve(slot_count_);
    for (uint32_t i = slot_count_; i > 0; --i) {
        free_list_.push_back(i - 1);
    }
}

bool BufferPool::transition(uint32_t slot, SlotState from, SlotState to) {
    auto expected = static_cast<uint32_t>(from);
    if (!states_[slot].compare_exchange_strong(expected, static_cast<uint32_t>(to),
                                               std::memory_order_acq_rel)) {
        return false;
    }
    if (record_transitions_) {
        std::lock_guard<std::mutex> lock(log_mutex_);
        transition_log_.push_back({slot, from, to});
    }
    return true;
}

size_t BufferPool::free_count() {
    std::lock_guard<std::mutex> lock(free_mutex_);
    return free_list_.size();
}

std::optional<uint32_t> BufferPool::pop_free() {
    std::lock_guard<std::mutex> lock(free_mutex_);
    if (free_list_.empty()) {
        return std::nullopt;
    }
    uint32_t slot = free_list_.back();
    free_list_.pop_back();
    return slot;
}

void BufferPool::push_free(uint32_t slot) {
    std::lock_guard<std::mutex> lock(free_mutex_);
    free_list_.push_back(slot);
}

RecordLocation BufferPool::lookup(uint32_t vid) {
    if (vid >= n_) {
        throw_invalid_argument("BufferPool::lookup: vid out of range");
    }
    uint64_t word = map_[vid].load(std::memory_order_acquire);
    if (word & kResidentBit) {
        auto slot = static_cast<uint32_t>(word & kValueMask);
        // Second chance: a sweep must see another access before evicting.
        transition(slot, SlotState::Marked, SlotState::Occupied);
        counters_.hits.fetch_add(1, std::memory_order_relaxed);
        return {true, slot};
    }
    counters_.misses.fetch_add(1, std::memory_order_relaxed);
    return {false, static_cast<uint32_t>(word & kValueMask)};
}

RecordLocation BufferPool::peek(uint32_t vid) const {
    if (vid >= n_) {
        throw_invalid_argument("BufferPool::peek: vid out of range");
    }
    uint64_t word = map_[vid].load(std::memory_order_acquire);
    return {(word & kResidentBit) != 0, static_cast<uint32_t>(word & kValueMask)};
}

BufferPool::BeginLoadResult BufferPool::begin_load(uint32_t vid, uint32_t page_id,
                                                   bool allow_evict) {
    if (vid >= n_) {
        throw_invalid_argument("BufferPool::begin_load: vid out of range");
    }
    uint64_t word = map_[vid].load(std::memory_order_acquire);
    for (;;) {
        if (word & kResidentBit) {
            return {BeginLoad::resident, {}};
        }
        if (word & kLoadingBit) {
            return {BeginLoad::already_loading, {}};
        }
        if (map_[vid].compare_exchange_weak(word, word | kLoadingBit,
                                            std::memory_order_acq_rel)) {
            break;
        }
        // word was refreshed by the failed CAS; reclassify.
    }

    auto slot = pop_free();
    if (!slot && allow_evict) {
        evict(1);
        slot = pop_free();
    }
    if (!slot) {
        // Nobody else can mutate the entry while the loading bit is ours.
        map_[vid].store(word, std::memory_order_release);
        return {BeginLoad::retry_later, {}};
    }

    if (!transition(*slot, SlotState::Free, SlotState::Locked)) {
        throw Error(ErrorCode::logic_error, "BufferPool: free-list slot was not Free");
    }
    versions_[*slot].fetch_add(1, std::memory_order_acq_rel);  // now odd
    slot_vids_[*slot].store(vid, std::memory_order_release);
    return {BeginLoad::reserved, {vid, page_id, *slot}};
}

void BufferPool::install(uint32_t slot, uint32_t vid, uint32_t page_id,
                         std::span<const uint8_t> extended,
                         std::span<const uint32_t> adjacency) {
    uint8_t* dst = payload(slot);
    auto degree = static_cast<uint16_t>(adjacency.size());
    std::memcpy(dst, &degree, kDegreeBytes);
    std::memcpy(dst + kDegreeBytes, extended.data(), extended.size());
    std::memcpy(dst + kDegreeBytes + extended_size_, adjacency.data(),
                adjacency.size() * sizeof(uint32_t));
    slot_pages_[slot].store(page_id, std::memory_order_release);

    versions_[slot].fetch_add(1, std::memory_order_release);  // even again
    // Publish the mapping while the slot is still Locked. Occupied slots are
    // claimable by eviction, and a claim that lands between the state change
    // and a late map update would be overwritten by it, leaving the map
    // pointing at a freed slot.
    map_[vid].store(kResidentBit | slot, std::memory_order_release);
    if (!transition(slot, SlotState::Locked, SlotState::Occupied)) {
        throw Error(ErrorCode::logic_error, "BufferPool: install on a non-Locked slot");
    }
    counters_.loads.fetch_add(1, std::memory_order_relaxed);
}

void BufferPool::complete_load(const Reservation& r, std::span<const uint8_t> page_bytes) {
    if (slot_state(r.slot) != SlotState::Locked ||
        slot_vids_[r.slot].load(std::memory_order_acquire) != r.vid) {
        throw Error(ErrorCode::logic_error, "BufferPool: stale reservation");
    }

    PageView view(page_bytes);
    auto slot_meta = view.find(r.vid);
    if (!slot_meta) {
        abort_load(r);
        throw_corrupt_data("BufferPool: vid not present in its directory page");
    }

    auto parse = [&](std::span<const uint8_t> rec,
                     std::vector<uint32_t>& adjacency) -> std::span<const uint8_t> {
        if (rec.size() < extended_size_) {
            throw_corrupt_data("BufferPool: record shorter than the extended code");
        }
        adjacency = decompress_adjacency(rec.subspan(extended_size_));
        if (adjacency.size() > max_degree_) {
            throw_corrupt_data("BufferPool: adjacency exceeds the degree bound");
        }
        if (!adjacency.empty() && adjacency.back() >= n_) {
            throw_corrupt_data("BufferPool: neighbor id out of range");
        }
        return rec.first(extended_size_);
    };

    std::vector<uint32_t> adjacency;
    std::span<const uint8_t> extended;
    try {
        extended = parse(view.record(*slot_meta), adjacency);
    } catch (const Error&) {
        abort_load(r);
        throw;
    }
    install(r.slot, r.vid, r.page_id, extended, adjacency);

    if (!co_fetch_ || slot_meta->color == 0) {
        return;
    }
    for (const auto& [other, rec] : view.coresidents(r.vid)) {
        if (other.vid == r.vid || other.vid >= n_) {
            continue;
        }
        uint64_t word = map_[other.vid].load(std::memory_order_acquire);
        if ((word & (kResidentBit | kLoadingBit)) != 0) {
            continue;
        }
        auto free = pop_free();  // best effort: no eviction for co-fetch
        if (!free) {
            break;
        }
        if (!map_[other.vid].compare_exchange_strong(word, word | kLoadingBit,
                                                     std::memory_order_acq_rel)) {
            push_free(*free);
            continue;
        }
        std::vector<uint32_t> other_adj;
        std::span<const uint8_t> other_ext;
        try {
            other_ext = parse(rec, other_adj);
        } catch (const Error&) {
            map_[other.vid].store(word, std::memory_order_release);
            push_free(*free);
            throw;
        }
        if (!transition(*free, SlotState::Free, SlotState::Locked)) {
            throw Error(ErrorCode::logic_error, "BufferPool: free-list slot was not Free");
        }
        versions_[*free].fetch_add(1, std::memory_order_acq_rel);
        slot_vids_[*free].store(other.vid, std::memory_order_release);
        install(*free, other.vid, r.page_id, other_ext, other_adj);
        counters_.cofetch_installs.fetch_add(1, std::memory_order_relaxed);
    }
}

void BufferPool::abort_load(const Reservation& r) {
    versions_[r.slot].fetch_add(1, std::memory_order_release);  // even again
    if (!transition(r.slot, SlotState::Locked, SlotState::Free)) {
        throw Error(ErrorCode::logic_error, "BufferPool: abort on a non-Locked slot");
    }
    map_[r.vid].store(r.page_id, std::memory_order_release);
    push_free(r.slot);
}

bool BufferPool::try_read(uint32_t vid, uint32_t slot, DecodedRecord& out) const {
    for (int attempt = 0; attempt < 64; ++attempt) {
        uint64_t v1 = versions_[slot].load(std::memory_order_acquire);
        if (v1 & 1ULL) {
            continue;  // mid-write
        }
        auto state = static_cast<SlotState>(states_[slot].load(std::memory_order_acquire));
        if (state != SlotState::Occupied && state != SlotState::Marked) {
            return false;
        }
        if (slot_vids_[slot].load(std::memory_order_acquire) != vid) {
            return false;
        }

        const uint8_t* src = payload(slot);
        uint16_t degree = 0;
        std::memcpy(&degree, src, kDegreeBytes);
        if (degree > max_degree_) {
            continue;  // torn read of a slot being rewritten
        }
        out.extended.resize(extended_size_);
        std::memcpy(out.extended.data(), src + kDegreeBytes, extended_size_);
        out.adjacency.resize(degree);
        std::memcpy(out.adjacency.data(), src + kDegreeBytes + extended_size_,
                    static_cast<size_t>(degree) * sizeof(uint32_t));

        std::atomic_thread_fence(std::memory_order_acquire);
        if (versions_[slot].load(std::memory_order_relaxed) == v1) {
            return true;
        }
    }
    return false;
}

uint32_t BufferPool::evict(uint32_t target_free) {
    uint32_t freed = 0;
    uint64_t steps = 2ULL * slot_count_;  // two full revolutions
    for (uint64_t s = 0; s < steps && freed < target_free; ++s) {
        auto slot = static_cast<uint32_t>(
            clock_hand_.fetch_add(1, std::memory_order_relaxed) % slot_count_);
        auto state = static_cast<SlotState>(states_[slot].load(std::memory_order_acquire));
        if (state == SlotState::Occupied) {
            transition(slot, SlotState::Occupied, SlotState::Marked);
            continue;
        }
        if (state != SlotState::Marked) {
            continue;  // Free and Locked are skipped
        }
        if (!transition(slot, SlotState::Marked, SlotState::Free)) {
            continue;  // touched or claimed first
        }
        // The claim won, so the slot's vid and page fields are stable until
        // this thread recycles it. Re-point the map entry at disk first.
        uint32_t vid = slot_vids_[slot].load(std::memory_order_acquire);
        uint32_t page_id = slot_pages_[slot].load(std::memory_order_acquire);
        map_[vid].store(page_id, std::memory_order_release);
        push_free(slot);
        freed++;
        counters_.evictions.fetch_add(1, std::memory_order_relaxed);
    }
    return freed;
}

void BufferPool::sweep_if_low() {
    if (watermark_slots_ == 0) {
        return;
    }
    size_t free = free_count();
    if (free >= watermark_slots_) {
        return;
    }
    counters_.sweeps.fetch_add(1, std::memory_order_relaxed);
    evict(static_cast<uint32_t>(watermark_slots_ - free));
}

PoolStats BufferPool::stats() const {
    PoolStats s;
    s.hits = counters_.hits.load(std::memory_order_relaxed);
    s.misses = counters_.misses.load(std::memory_order_relaxed);
    s.loads = counters_.loads.load(std::memory_order_relaxed);
    s.evictions = counters_.evictions.load(std::memory_order_relaxed);
    s.cofetch_installs = counters_.cofetch_installs.load(std::memory_order_relaxed);
    s.sweeps = counters_.sweeps.load(std::memory_order_relaxed);
    return s;
}

SlotState BufferPool::slot_state(uint32_t slot) const {
    return static_cast<SlotState>(states_[slot].load(std::memory_order_acquire));
}

std::vector<SlotTransition> BufferPool::drain_transition_log() {
    std::lock_guard<std::mutex> lock(log_mutex_);
    return std::exchange(transition_log_, {});
}

}  // namespace gannet
