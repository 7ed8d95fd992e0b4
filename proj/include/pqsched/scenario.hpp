#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "pqsched/queue_model.hpp"

namespace pqsched {

/// Per-path packet counts for one block. All zeros means the block is dropped.
using Schedule = std::vector<int>;

/// How the sender observes the system when it schedules a block.
///  - instantaneous: the channel state of the coming interval and the current queues.
///  - delayed: the channel state and queues as they were feedback_delay earlier.
enum class FeedbackMode { instantaneous, delayed };

struct ScenarioConfig {
  std::vector<PathModel> paths;
  int block_size = 1;               ///< K
  double generation_period = 1.0;   ///< time between block arrivals
  double deadline = 1.0;            ///< delivery deadline after generation
  double feedback_delay = 0.0;      ///< age of the observed state in delayed mode
  double discount = 0.99;           ///< lambda in [0, 1)
  std::optional<int> max_total;     ///< cap on sum(s); 2K when unset
  FeedbackMode feedback = FeedbackMode::instantaneous;

  std::size_t path_count() const noexcept { return paths.size(); }
  int total_cap() const noexcept { return max_total.value_or(2 * block_size); }
  bool delayed() const noexcept { return feedback == FeedbackMode::delayed; }

  /// Throws InputError on any invalid field and UnsupportedError when the
  /// feedback delay exceeds the generation period in delayed mode.
  void validate() const;
};

struct SystemState {
  std::size_t index = 0;
  std::vector<PathState> paths;
};

/// Dense indexing of the joint state space. Path m contributes the local index
/// channel * (capacity + 1) + queue, and the last path varies fastest.
class StateSpace {
 public:
  StateSpace() = default;
  explicit StateSpace(const std::vector<PathModel>& paths);

  std::size_t size() const noexcept { return size_; }
  std::size_t path_count() const noexcept { return local_sizes_.size(); }
  std::size_t local_size(std::size_t m) const { return local_sizes_[m]; }
  std::size_t stride(std::size_t m) const { return strides_[m]; }
  int capacity(std::size_t m) const { return capacities_[m]; }

  std::size_t local_index(std::size_t m, PathState s) const {
    return s.channel * static_cast<std::size_t>(capacities_[m] + 1) +
           static_cast<std::size_t>(s.queue);
  }
  PathState local_state(std::size_t m, std::size_t local) const {
    const auto width = static_cast<std::size_t>(capacities_[m] + 1);
    return PathState{local / width, static_cast<int>(local % width)};
  }
  std::size_t local_of(std::size_t index, std::size_t m) const {
    return (index / strides_[m]) % local_sizes_[m];
  }

  SystemState decode(std::size_t index) const;
  std::size_t encode(std::span<const PathState> states) const;

 private:
  std::vector<std::size_t> local_sizes_;
  std::vector<std::size_t> strides_;
  std::vector<int> capacities_;
  std::size_t size_ = 0;
};

/// Drop action followed by every s with s_m <= capacity_m - q_m and
/// K <= sum(s) <= total_cap(), ordered with the first path varying fastest.
std::vector<Schedule> enumerate_actions(const SystemState& state, const ScenarioConfig& cfg);

}  // namespace pqsched
