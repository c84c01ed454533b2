#pragma once

// Minimal reverse-mode differentiable tensor: NCHW storage, a tape of
// recorded ops, and trainable parameters with Adam moment buffers.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <new>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sguie/errors.hpp"

namespace sguie {

/// Cache-line aligned allocation. Vectorized reductions then see the same
/// alignment on every run, which keeps results bit-reproducible.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) noexcept { return true; }
};

template <typename T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

struct Shape {
  std::size_t n = 1;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  constexpr std::size_t numel() const { return n * c * h * w; }
  constexpr std::size_t plane() const { return h * w; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;

  std::string str() const {
    std::ostringstream os;
    os << '[' << n << ',' << c << ',' << h << ',' << w << ']';
    return os.str();
  }
};

/// Half-open pixel rectangle [y0, y1) x [x0, x1).
struct Box {
  std::size_t y0 = 0;
  std::size_t x0 = 0;
  std::size_t y1 = 0;
  std::size_t x1 = 0;

  constexpr std::size_t height() const { return y1 - y0; }
  constexpr std::size_t width() const { return x1 - x0; }
  friend constexpr bool operator==(const Box&, const Box&) = default;
};

template <typename T>
class Tape;

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  Tensor(Shape shape, std::initializer_list<T> data) : Tensor(shape, Buffer<T>(data)) {}
  Tensor(Shape shape, const std::vector<T>& data) : Tensor(shape, Buffer<T>(data.begin(), data.end())) {}

  Tensor(Shape shape, Buffer<T> data) : s_(std::make_shared<Storage>()) {
    if (data.size() != shape.numel()) {
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape.str());
    }
    s_->shape = shape;
    s_->data = std::move(data);
  }

  static Tensor zeros(Shape shape) { return filled(shape, T(0)); }

  static Tensor filled(Shape shape, T value) {
    return Tensor(shape, Buffer<T>(shape.numel(), value));
  }

  /// A leaf that accumulates gradients (weights, or inputs under test).
  static Tensor leaf(Shape shape, std::initializer_list<T> data) { return leaf(shape, Buffer<T>(data)); }
  static Tensor leaf(Shape shape, const std::vector<T>& data) { return leaf(shape, Buffer<T>(data.begin(), data.end())); }

  static Tensor leaf(Shape shape, Buffer<T> data) {
    Tensor t(shape, std::move(data));
    t.s_->requires_grad = true;
    t.s_->grad.assign(shape.numel(), T(0));
    return t;
  }

  bool defined() const { return static_cast<bool>(s_); }
  const Shape& shape() const { return s_->shape; }
  std::size_t numel() const { return s_->data.size(); }

  std::span<const T> data() const { return s_->data; }
  /// Direct write access; only leaves should be mutated (optimizer, grad checks).
  std::span<T> mutable_data() { return s_->data; }

  T item() const {
    if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape().str());
    return s_->data[0];
  }

  T at(std::size_t c, std::size_t y, std::size_t x) const {
    const Shape& s = shape();
    return s_->data[(c * s.h + y) * s.w + x];
  }

  bool requires_grad() const { return s_ && s_->requires_grad; }
  bool has_grad() const { return s_ && !s_->grad.empty(); }
  std::span<const T> grad() const { return s_->grad; }

  /// Gradient buffer, allocated as zeros on first access.
  std::span<T> mutable_grad() {
    if (s_->grad.empty()) s_->grad.assign(numel(), T(0));
    return s_->grad;
  }

  void zero_grad() {
    if (!s_->grad.empty()) std::fill(s_->grad.begin(), s_->grad.end(), T(0));
  }

  bool same_storage(const Tensor& other) const { return s_ == other.s_; }

  /// Deep copy detached from any tape.
  Tensor clone() const { return Tensor(shape(), Buffer<T>(s_->data)); }

 private:
  friend class Tape<T>;

  struct Storage {
    Shape shape;
    Buffer<T> data;
    Buffer<T> grad;
    bool requires_grad = false;
    const Tape<T>* tape = nullptr;
    std::size_t node = 0;
  };

  std::shared_ptr<Storage> s_;
};

/// Ordered record of differentiable ops. Nodes are appended in execution
/// order, so reverse iteration is a valid topological order for backward.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(std::span<const T> grad_out)>;

  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

  /// Registers `out` as produced from `inputs`. When nothing upstream needs a
  /// gradient (or recording is off) the op is not recorded at all.
  Tensor<T> record(Tensor<T> out, std::initializer_list<Tensor<T>> inputs, BackwardFn backward) {
    return record(std::move(out), std::vector<Tensor<T>>(inputs), std::move(backward));
  }

  Tensor<T> record(Tensor<T> out, std::vector<Tensor<T>> inputs, BackwardFn backward) {
    if (!recording_) return out;
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (!any) return out;
    out.s_->requires_grad = true;
    out.s_->tape = this;
    out.s_->node = nodes_.size();
    nodes_.push_back(Node{std::move(inputs), out, std::move(backward)});
    return out;
  }

  void backward(const Tensor<T>& loss) {
    if (!loss.defined() || loss.numel() != 1) {
      throw UsageError("backward requires a scalar loss");
    }
    const T one = T(1);
    backward(loss, std::span<const T>(&one, 1));
  }

  /// Reverse accumulation seeded with an explicit output gradient.
  void backward(const Tensor<T>& out, std::span<const T> seed) {
    if (!out.defined() || out.s_->tape != this) {
      throw UsageError("backward on a tensor not produced by this tape");
    }
    if (seed.size() != out.numel()) throw ShapeError("backward seed length mismatch");
    for (auto& node : nodes_) node.output.s_->grad.clear();
    auto g = Tensor<T>(out).mutable_grad();
    std::copy(seed.begin(), seed.end(), g.begin());
    for (std::size_t i = out.s_->node + 1; i-- > 0;) {
      Node& node = nodes_[i];
      if (node.output.s_->grad.empty()) continue;
      node.backward(node.output.s_->grad);
    }
  }

  void clear() { nodes_.clear(); }

 private:
  struct Node {
    std::vector<Tensor<T>> inputs;
    Tensor<T> output;
    BackwardFn backward;
  };

  bool recording_;
  std::vector<Node> nodes_;
};

/// Trainable tensor plus Adam state.
template <typename T>
struct Parameter {
  Tensor<T> value;
  std::vector<T> adam_m;
  std::vector<T> adam_v;
  std::int64_t step_count = 0;

  Parameter() = default;
  explicit Parameter(Shape shape)
      : value(Tensor<T>::leaf(shape, Buffer<T>(shape.numel(), T(0)))),
        adam_m(shape.numel(), T(0)),
        adam_v(shape.numel(), T(0)) {}

  const Shape& shape() const { return value.shape(); }
  std::size_t numel() const { return value.numel(); }
  void zero_grad() { value.zero_grad(); }
};

}  // namespace sguie
