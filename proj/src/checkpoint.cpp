#include "dpiqn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace dpiqn {

namespace {
constexpr char kMagic[8] = {'D', 'P', 'I', 'Q', 'N', 'C', 'K', '1'};

size_t dtype_size(const std::string& d) {
  if (d == "f32" || d == "i32") return 4;
  if (d == "f64" || d == "i64") return 8;
  if (d == "u8") return 1;
  throw ContractError("unknown dtype " + d);
}
}  // namespace

void Checkpoint::put(TensorBlob blob) {
  DPIQN_CHECK(!index_.count(blob.name), "duplicate checkpoint tensor ", blob.name);
  int64_t n = 1;
  for (int64_t e : blob.shape) n *= e;
  DPIQN_CHECK(blob.data.size() == static_cast<size_t>(n) * dtype_size(blob.dtype),
              "blob ", blob.name, " has ", blob.data.size(), " bytes, shape says ",
              static_cast<size_t>(n) * dtype_size(blob.dtype));
  index_[blob.name] = blobs_.size();
  blobs_.push_back(std::move(blob));
}

const TensorBlob& Checkpoint::get(const std::string& name) const {
  auto it = index_.find(name);
  DPIQN_CHECK(it != index_.end(), "checkpoint has no tensor ", name);
  return blobs_[it->second];
}

void Checkpoint::put_f32(const std::string& name, const Tensor<float>& t) {
  TensorBlob b;
  b.name = name;
  b.dtype = "f32";
  b.shape = t.shape;
  b.data.resize(t.data.size() * sizeof(float));
  std::memcpy(b.data.data(), t.data.data(), b.data.size());
  put(std::move(b));
}

Tensor<float> Checkpoint::get_f32(const std::string& name) const {
  const TensorBlob& b = get(name);
  DPIQN_CHECK(b.dtype == "f32", name, " is ", b.dtype, ", expected f32");
  Tensor<float> t(b.shape);
  std::memcpy(t.data.data(), b.data.data(), b.data.size());
  return t;
}

void Checkpoint::put_u8(const std::string& name, std::vector<int64_t> shape,
                        const std::vector<uint8_t>& bytes) {
  TensorBlob b;
  b.name = name;
  b.dtype = "u8";
  b.shape = std::move(shape);
  b.data = bytes;
  put(std::move(b));
}

void Checkpoint::put_i32(const std::string& name, const std::vector<int32_t>& v) {
  TensorBlob b;
  b.name = name;
  b.dtype = "i32";
  b.shape = {static_cast<int64_t>(v.size())};
  b.data.resize(v.size() * sizeof(int32_t));
  std::memcpy(b.data.data(), v.data(), b.data.size());
  put(std::move(b));
}

std::vector<int32_t> Checkpoint::get_i32(const std::string& name) const {
  const TensorBlob& b = get(name);
  DPIQN_CHECK(b.dtype == "i32", name, " is ", b.dtype, ", expected i32");
  std::vector<int32_t> v(b.data.size() / sizeof(int32_t));
  std::memcpy(v.data(), b.data.data(), b.data.size());
  return v;
}

void Checkpoint::put_params(const std::string& prefix, const ParamSet& params) {
  for (size_t i = 0; i < params.size(); ++i)
    put_f32(prefix + "/" + params.names[i], params.tensors[i]);
}

ParamSet Checkpoint::get_params(const std::string& prefix) const {
  ParamSet out;
  const std::string want = prefix + "/";
  for (const auto& b : blobs_) {
    if (b.name.rfind(want, 0) != 0) continue;
    Tensor<float>& t = out.add(b.name.substr(want.size()), b.shape);
    std::memcpy(t.data.data(), b.data.data(), b.data.size());
  }
  DPIQN_CHECK(out.size() > 0, "checkpoint has no tensors under ", prefix);
  return out;
}

void Checkpoint::save(const std::string& path) const {
  nlohmann::json manifest;
  manifest["version"] = 1;
  manifest["extras"] = nlohmann::json::parse(extras_);
  nlohmann::json tensors = nlohmann::json::array();
  uint64_t offset = 0;
  for (const auto& b : blobs_) {
    nlohmann::json e;
    e["name"] = b.name;
    e["dtype"] = b.dtype;
    e["shape"] = b.shape;
    e["offset"] = offset;
    e["bytes"] = b.data.size();
    tensors.push_back(e);
    offset += b.data.size();
  }
  manifest["tensors"] = tensors;
  const std::string text = manifest.dump();

  std::ofstream f(path, std::ios::binary);
  DPIQN_CHECK(f.good(), "cannot open ", path, " for writing");
  f.write(kMagic, sizeof(kMagic));
  const uint64_t len = text.size();
  f.write(reinterpret_cast<const char*>(&len), sizeof(len));
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& b : blobs_)
    f.write(reinterpret_cast<const char*>(b.data.data()),
            static_cast<std::streamsize>(b.data.size()));
  DPIQN_CHECK(f.good(), "write to ", path, " failed");
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  DPIQN_CHECK(f.good(), "cannot open checkpoint ", path);
  char magic[8];
  f.read(magic, sizeof(magic));
  DPIQN_CHECK(f.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
              path, " is not a checkpoint file (bad magic)");
  uint64_t len = 0;
  f.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string text(len, '\0');
  f.read(text.data(), static_cast<std::streamsize>(len));
  DPIQN_CHECK(f.good(), "truncated checkpoint manifest in ", path);

  nlohmann::json manifest = nlohmann::json::parse(text);
  DPIQN_CHECK(manifest.at("version").get<int>() == 1, "unsupported checkpoint version");

  Checkpoint ck;
  ck.extras_ = manifest.at("extras").dump();
  for (const auto& e : manifest.at("tensors")) {
    TensorBlob b;
    b.name = e.at("name").get<std::string>();
    b.dtype = e.at("dtype").get<std::string>();
    b.shape = e.at("shape").get<std::vector<int64_t>>();
    b.data.resize(e.at("bytes").get<size_t>());
    f.read(reinterpret_cast<char*>(b.data.data()), static_cast<std::streamsize>(b.data.size()));
    DPIQN_CHECK(f.good(), "truncated tensor ", b.name, " in ", path);
    ck.put(std::move(b));
  }
  return ck;
}

}  // namespace dpiqn
