#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "dpiqn/common.hpp"

namespace dpiqn {

// Dense row-major n-d array. Plain value type: copies are deep.
template <typename T>
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)), data(count(shape)) {}
  Tensor(std::vector<int64_t> s, T fill) : shape(std::move(s)), data(count(shape), fill) {}

  static int64_t count(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t e : s) {
      DPIQN_CHECK(e > 0, "tensor extents must be positive");
      n *= e;
    }
    return n;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }
  T& operator[](int64_t i) { return data[i]; }
  const T& operator[](int64_t i) const { return data[i]; }

  int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }
  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape);
    for (int64_t i = 0; i < numel(); ++i) out.data[static_cast<size_t>(i)] = static_cast<U>(data[static_cast<size_t>(i)]);
    return out;
  }
};

inline std::string shape_str(const std::vector<int64_t>& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

// Ordered collection of named tensors; parameter sets, gradients and
// optimizer moments all share this layout so shapes stay congruent.
template <typename T>
struct NamedTensors {
  std::vector<std::string> names;
  std::vector<Tensor<T>> tensors;
  std::unordered_map<std::string, size_t> index;

  Tensor<T>& add(const std::string& name, std::vector<int64_t> shape) {
    DPIQN_CHECK(!index.count(name), "duplicate tensor name ", name);
    index[name] = names.size();
    names.push_back(name);
    tensors.emplace_back(std::move(shape));
    return tensors.back();
  }

  bool has(const std::string& name) const { return index.count(name) != 0; }

  Tensor<T>& at(const std::string& name) {
    auto it = index.find(name);
    DPIQN_CHECK(it != index.end(), "no tensor named ", name);
    return tensors[it->second];
  }
  const Tensor<T>& at(const std::string& name) const {
    auto it = index.find(name);
    DPIQN_CHECK(it != index.end(), "no tensor named ", name);
    return tensors[it->second];
  }

  size_t size() const { return names.size(); }

  int64_t total_elements() const {
    int64_t n = 0;
    for (const auto& t : tensors) n += t.numel();
    return n;
  }

  // Same names and shapes, zero-filled. Used for gradients and moments.
  NamedTensors zeros_like() const {
    NamedTensors out;
    for (size_t i = 0; i < names.size(); ++i) out.add(names[i], tensors[i].shape);
    return out;
  }

  void set_zero() {
    for (auto& t : tensors) t.fill(T(0));
  }

  uint64_t checksum() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (size_t i = 0; i < names.size(); ++i) {
      h = fnv1a64(names[i].data(), names[i].size(), h);
      h = fnv1a64(tensors[i].data.data(), tensors[i].data.size() * sizeof(T), h);
    }
    return h;
  }
};

using ParamSet = NamedTensors<float>;
using Gradients = NamedTensors<float>;

}  // namespace dpiqn
