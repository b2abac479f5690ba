#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "knowsr/errors.hpp"
#include "knowsr/rng.hpp"
#include "knowsr/tensor.hpp"

namespace knowsr::replay {

/// One environment step as seen by every agent: joint observation and action
/// matrices are n_agents x dim, rewards one entry per agent.
struct Transition {
    nn::Tensor2 obs;      // n_agents x obs_dim
    nn::Tensor2 actions;  // n_agents x action_dim
    std::vector<double> rewards;
    nn::Tensor2 next_obs; // n_agents x obs_dim
    bool done = false;
};

/// Bounded FIFO experience store. When full, each push overwrites the oldest
/// entry. Single writer; sampling must not interleave with a push.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw ParameterError("ReplayBuffer: capacity must be positive");
    }

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return ring_.size(); }

    void push(Transition t) {
        if (ring_.size() < capacity_) {
            ring_.push_back(std::move(t));
        } else {
            ring_[cursor_] = std::move(t);
            cursor_ = (cursor_ + 1) % capacity_;
        }
    }

    /// Element i in logical order, oldest first.
    const Transition& at(std::size_t i) const {
        if (i >= ring_.size()) throw ParameterError("ReplayBuffer::at: index out of range");
        if (ring_.size() < capacity_) return ring_[i];
        return ring_[(cursor_ + i) % capacity_];
    }

    /// n uniform draws without replacement (partial Fisher-Yates over the
    /// stored indices). Deterministic given the generator state.
    std::vector<Transition> sample(std::size_t n, Rng& rng) const {
        if (n == 0) throw ParameterError("ReplayBuffer::sample: n must be >= 1");
        if (n > ring_.size())
            throw InsufficientDataError("ReplayBuffer::sample: requested " + std::to_string(n) +
                                        " of " + std::to_string(ring_.size()) + " stored");
        std::vector<std::size_t> idx(ring_.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::vector<Transition> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = i + rng.uniform_index(idx.size() - i);
            std::swap(idx[i], idx[j]);
            out.push_back(at(idx[i]));
        }
        return out;
    }

    std::vector<Transition> sample(std::size_t n, std::uint64_t seed) const {
        Rng rng(seed);
        return sample(n, rng);
    }

private:
    std::size_t capacity_;
    std::size_t cursor_ = 0; // next overwrite position once full
    std::vector<Transition> ring_;
};

/// Consecutive non-overlapping views over the batch, in order; the final
/// chunk may be short. Views borrow the batch, which must outlive them.
inline std::vector<std::span<const Transition>> ordered_chunks(
    std::span<const Transition> batch, std::size_t chunk_size) {
    if (chunk_size == 0) throw ParameterError("ordered_chunks: chunk_size must be >= 1");
    std::vector<std::span<const Transition>> chunks;
    for (std::size_t start = 0; start < batch.size(); start += chunk_size)
        chunks.push_back(batch.subspan(start, std::min(chunk_size, batch.size() - start)));
    return chunks;
}

} // namespace knowsr::replay
