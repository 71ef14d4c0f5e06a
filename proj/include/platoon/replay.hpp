#pragma once

#include <cstddef>
#include <vector>

#include "platoon/observation.hpp"
#include "platoon/rng.hpp"

namespace platoon {

struct Transition {
    Observation s;
    int a = 0;
    double r = 0.0;  // shared reward, stored in training scale
    Observation s_next;
    bool done = false;

    bool operator==(const Transition&) const = default;
};

// Bounded FIFO ring; push evicts the oldest entry, sampling is uniform over
// the stored entries (with replacement across draws).
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        data_.reserve(capacity);
    }

    void push(Transition t) {
        if (data_.size() < capacity_) {
            data_.push_back(std::move(t));
        } else {
            data_[cursor_] = std::move(t);
        }
        cursor_ = (cursor_ + 1) % capacity_;
    }

    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }

    const Transition& sample(Rng& rng) const {
        return data_[rng.uniform_int(static_cast<std::uint32_t>(data_.size()))];
    }

    // Entries in insertion order, oldest first.
    const Transition& oldest_first(std::size_t i) const {
        if (data_.size() < capacity_) return data_[i];
        return data_[(cursor_ + i) % capacity_];
    }

private:
    std::size_t capacity_;
    std::vector<Transition> data_;
    std::size_t cursor_ = 0;
};

}  // namespace platoon
