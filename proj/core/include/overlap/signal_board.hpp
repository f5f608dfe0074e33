#pragma once

#include <atomic>
#include <memory>
#include <string>

#include "overlap/errors.hpp"

namespace overlap {

// Per-rank array of readiness flags, one per communication tile. A set with
// release ordering happens-before any acquire load observing Set, so data
// written before the set is visible to the reader.
class SignalBoard {
public:
    explicit SignalBoard(int num_flags)
        : num_flags_(num_flags), flags_(std::make_unique<std::atomic<uint32_t>[]>(num_flags)) {
        for (int i = 0; i < num_flags; ++i) flags_[i].store(0, std::memory_order_relaxed);
    }

    int num_flags() const { return num_flags_; }

    // Unset -> Set; returns false if the flag was already set (exactly-once
    // violation, surfaced by tests).
    bool set(int i) {
        check(i);
        return flags_[i].exchange(1, std::memory_order_release) == 0;
    }

    void preset(int i) { check(i); flags_[i].store(1, std::memory_order_release); }

    bool is_set(int i) const {
        check(i);
        return flags_[i].load(std::memory_order_acquire) != 0;
    }

    int count_set() const {
        int n = 0;
        for (int i = 0; i < num_flags_; ++i)
            if (flags_[i].load(std::memory_order_relaxed)) ++n;
        return n;
    }

    void reset_all() {
        for (int i = 0; i < num_flags_; ++i) flags_[i].store(0, std::memory_order_relaxed);
    }

private:
    void check(int i) const {
        if (i < 0 || i >= num_flags_)
            throw BoundsError("signal index " + std::to_string(i) + " out of range [0," +
                              std::to_string(num_flags_) + ")");
    }

    int num_flags_;
    std::unique_ptr<std::atomic<uint32_t>[]> flags_;
};

}  // namespace overlap
