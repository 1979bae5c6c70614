#pragma once

#include <functional>
#include <string>
#include <vector>

#include "wavelatent/tensor.hpp"

namespace wavelatent {

/// Records differentiable operations in execution order and replays their
/// backward rules in reverse.
///
/// A tape is single-use: one backward() consumes it. Tapes share no state, so
/// separate tapes may be driven from separate threads.
class Tape {
 public:
  enum class Mode { kRecord, kInference };

  explicit Tape(Mode mode = Mode::kRecord) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return mode_ == Mode::kRecord && !consumed_; }
  bool consumed() const { return consumed_; }
  std::size_t size() const { return entries_.size(); }
  const std::string& op_name(std::size_t i) const { return entries_.at(i).name; }

  /// True when an op over `inputs` must be recorded.
  bool should_record(std::initializer_list<const Tensor*> inputs) const;

  void record(std::string name, std::function<void()> backward);

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded rule in reverse order.
  /// Rejects non-scalar losses and a second call on the same tape.
  void backward(Tensor& loss);

  /// Names of ops in the order their backward rules ran (last backward only).
  const std::vector<std::string>& backward_trace() const { return trace_; }

 private:
  struct Entry {
    std::string name;
    std::function<void()> backward;
  };

  Mode mode_;
  bool consumed_ = false;
  std::vector<Entry> entries_;
  std::vector<std::string> trace_;
};

}  // namespace wavelatent
