#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dpiqn/tensor.hpp"

namespace dpiqn {

// Flat binary container of named tensors: versioned magic header, a JSON text
// manifest (name, dtype, shape, byte offset), then raw little-endian data.
struct TensorBlob {
  std::string name;
  std::string dtype;  // f32 | f64 | u8 | i32 | i64
  std::vector<int64_t> shape;
  std::vector<uint8_t> data;
};

class Checkpoint {
 public:
  void put(TensorBlob blob);
  bool has(const std::string& name) const { return index_.count(name) != 0; }
  const TensorBlob& get(const std::string& name) const;
  const std::vector<TensorBlob>& blobs() const { return blobs_; }

  void put_f32(const std::string& name, const Tensor<float>& t);
  Tensor<float> get_f32(const std::string& name) const;
  void put_u8(const std::string& name, std::vector<int64_t> shape,
              const std::vector<uint8_t>& bytes);
  void put_i32(const std::string& name, const std::vector<int32_t>& v);
  std::vector<int32_t> get_i32(const std::string& name) const;

  // Stores/restores a whole named set under `prefix/`, preserving order.
  void put_params(const std::string& prefix, const ParamSet& params);
  ParamSet get_params(const std::string& prefix) const;

  // Free-form JSON document for scalar state (schedules, rng strings, ...).
  void set_extras(std::string json) { extras_ = std::move(json); }
  const std::string& extras() const { return extras_; }

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

 private:
  std::vector<TensorBlob> blobs_;
  std::map<std::string, size_t> index_;
  std::string extras_ = "{}";
};

}  // namespace dpiqn
