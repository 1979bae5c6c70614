#include "wavelatent/tape.hpp"

#include <stdexcept>

namespace wavelatent {

bool Tape::should_record(std::initializer_list<const Tensor*> inputs) const {
  if (!recording()) return false;
  for (const Tensor* t : inputs) {
    if (t && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void Tape::record(std::string name, std::function<void()> backward) {
  if (consumed_) throw std::logic_error("cannot record on a consumed tape");
  entries_.push_back({std::move(name), std::move(backward)});
}

void Tape::backward(Tensor& loss) {
  if (consumed_) throw std::logic_error("backward called twice on the same tape");
  if (loss.numel() != 1) {
    throw ShapeError("backward requires a scalar loss, got shape " + to_string(loss.shape()));
  }
  consumed_ = true;
  trace_.clear();
  // A loss that does not depend on any parameter leaves every gradient at zero.
  if (!loss.requires_grad()) return;
  loss.mutable_grad()[0] += 1.0f;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    it->backward();
    trace_.push_back(it->name);
  }
  entries_.clear();
}

}  // namespace wavelatent
