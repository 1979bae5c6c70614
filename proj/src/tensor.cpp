#include "wavelatent/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>

namespace wavelatent {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t acc, int d) { return acc * static_cast<std::size_t>(d); });
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void validate_shape(const Shape& shape) {
  for (int d : shape) {
    if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + to_string(shape));
  }
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0f, requires_grad); }

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  validate_shape(shape);
  const std::size_t n = wavelatent::numel(shape);
  return from(std::move(shape), std::vector<float>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<float> values, bool requires_grad) {
  validate_shape(shape);
  if (values.size() != wavelatent::numel(shape)) {
    throw ShapeError("tensor of shape " + to_string(shape) + " needs " +
                     std::to_string(wavelatent::numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  auto s = std::make_shared<Storage>();
  s->shape = std::move(shape);
  s->data = std::move(values);
  s->requires_grad = requires_grad;
  if (requires_grad) s->grad.assign(s->data.size(), 0.0f);
  return Tensor(std::move(s));
}

Tensor Tensor::scalar(float value, bool requires_grad) { return from({}, {value}, requires_grad); }

const Tensor::Storage& Tensor::storage() const {
  if (!storage_) throw std::logic_error("use of an undefined tensor");
  return *storage_;
}

const Shape& Tensor::shape() const { return storage().shape; }

int Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + to_string(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return storage().data.size(); }

std::span<const float> Tensor::data() const { return storage().data; }

std::span<float> Tensor::mutable_data() const {
  storage();
  return storage_->data;
}

float Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return storage().data[0];
}

bool Tensor::requires_grad() const { return storage().requires_grad; }

std::span<const float> Tensor::grad() const {
  if (!requires_grad()) throw std::logic_error("tensor does not require grad");
  return storage_->grad;
}

std::span<float> Tensor::mutable_grad() const {
  if (!requires_grad()) throw std::logic_error("tensor does not require grad");
  return storage_->grad;
}

void Tensor::zero_grad() const {
  if (requires_grad()) std::fill(storage_->grad.begin(), storage_->grad.end(), 0.0f);
}

Tensor Tensor::clone(bool requires_grad) const {
  return from(shape(), std::vector<float>(data().begin(), data().end()), requires_grad);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

}  // namespace wavelatent
