#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cutgan/core/rng.hpp"

namespace cutgan {

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

using Shape = std::vector<int64_t>;

inline int64_t numel_of(const Shape& s) {
  int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

// Dense row-major tensor. Storage is shared so reshapes are cheap aliases.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape)
      : shape_(std::move(shape)),
        store_(std::make_shared<std::vector<T>>(numel_of(shape_))) {}
  Tensor(Shape shape, T fill)
      : shape_(std::move(shape)),
        store_(std::make_shared<std::vector<T>>(numel_of(shape_), fill)) {}

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor full(Shape s, T v) { return Tensor(std::move(s), v); }
  static Tensor scalar(T v) { return Tensor(Shape{1}, v); }

  static Tensor from_vector(Shape s, std::vector<T> v) {
    Tensor t;
    t.shape_ = std::move(s);
    check(numel_of(t.shape_) == static_cast<int64_t>(v.size()),
          "from_vector: size mismatch for shape " + shape_str(t.shape_));
    t.store_ = std::make_shared<std::vector<T>>(std::move(v));
    return t;
  }

  static Tensor randn(Shape s, Rng& rng, T stddev = 1, T mean = 0) {
    Tensor t(std::move(s));
    for (auto& v : *t.store_) v = mean + stddev * static_cast<T>(rng.normal());
    return t;
  }

  bool defined() const { return store_ != nullptr; }
  const Shape& shape() const { return shape_; }
  int64_t dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int64_t numel() const { return store_ ? static_cast<int64_t>(store_->size()) : 0; }

  T* data() { return store_->data(); }
  const T* data() const { return store_->data(); }
  T& operator[](int64_t i) { return (*store_)[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return (*store_)[static_cast<size_t>(i)]; }

  T item() const {
    check(numel() == 1, "item(): tensor is not scalar, shape " + shape_str(shape_));
    return (*store_)[0];
  }

  // Aliasing reshape: same storage, new shape.
  Tensor reshaped(Shape s) const {
    check(numel_of(s) == numel(), "reshape: numel mismatch " + shape_str(shape_) + " -> " + shape_str(s));
    Tensor t;
    t.shape_ = std::move(s);
    t.store_ = store_;
    return t;
  }

  Tensor clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.store_ = std::make_shared<std::vector<T>>(*store_);
    return t;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> t(shape_);
    for (int64_t i = 0; i < numel(); ++i) t[i] = static_cast<U>((*store_)[static_cast<size_t>(i)]);
    return t;
  }

  void fill(T v) { std::fill(store_->begin(), store_->end(), v); }

  void add_(const Tensor& other) {
    check(other.numel() == numel(), "add_: numel mismatch");
    const T* o = other.data();
    T* d = data();
    for (int64_t i = 0; i < numel(); ++i) d[i] += o[i];
  }

  void scale_(T c) {
    T* d = data();
    for (int64_t i = 0; i < numel(); ++i) d[i] *= c;
  }

  bool all_finite() const {
    for (int64_t i = 0; i < numel(); ++i)
      if (!std::isfinite(static_cast<double>((*store_)[static_cast<size_t>(i)]))) return false;
    return true;
  }

 private:
  Shape shape_;
  std::shared_ptr<std::vector<T>> store_;
};

}  // namespace cutgan
