#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wavelatent {

using Shape = std::vector<int>;

/// Thrown when operand shapes do not satisfy an operation's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense float32 tensor handle.
///
/// Copies share storage, so mutation is allowed through const handles. Values
/// are fixed once the tensor is built; only
/// parameters (leaves) are rewritten, and only by the optimizer between steps.
/// A tensor that requires grad owns a zero-initialised gradient buffer of the
/// same shape.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<float> values, bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(storage_); }
  const Shape& shape() const;
  int dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<const float> data() const;
  std::span<float> mutable_data() const;
  float item() const;

  bool requires_grad() const;
  std::span<const float> grad() const;
  std::span<float> mutable_grad() const;
  void zero_grad() const;

  /// Deep copy of the values; the copy is a fresh leaf.
  Tensor clone(bool requires_grad = false) const;

  bool same_storage(const Tensor& other) const { return storage_ == other.storage_; }

 private:
  struct Storage {
    Shape shape;
    std::vector<float> data;
    std::vector<float> grad;
    bool requires_grad = false;
  };

  explicit Tensor(std::shared_ptr<Storage> storage) : storage_(std::move(storage)) {}
  const Storage& storage() const;

  std::shared_ptr<Storage> storage_;
};

/// Throws ShapeError naming `op` unless both shapes are identical.
void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

}  // namespace wavelatent
