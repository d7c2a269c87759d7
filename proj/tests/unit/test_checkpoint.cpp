#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "dpiqn/checkpoint.hpp"

using namespace dpiqn;

TEST_CASE("checkpoint round-trips tensors, params, and extras") {
  Checkpoint ck;
  Tensor<float> t({2, 3});
  for (int i = 0; i < 6; ++i) t[i] = 0.5f * i;
  ck.put_f32("weights", t);
  ck.put_u8("bytes", {4}, {1, 2, 3, 4});
  ck.put_i32("ids", {10, -3, 7});

  ParamSet params;
  params.add("fc.w", {2, 2}).fill(1.5f);
  params.add("fc.b", {2}).fill(-0.25f);
  ck.put_params("online", params);
  ck.set_extras("{\"step\":42,\"rng\":\"state\"}");

  const std::string path = "test_ckpt.bin";
  ck.save(path);
  Checkpoint back = Checkpoint::load(path);

  Tensor<float> t2 = back.get_f32("weights");
  CHECK(t2.shape == t.shape);
  for (int i = 0; i < 6; ++i) CHECK(t2[i] == t[i]);
  CHECK(back.get("bytes").data == std::vector<uint8_t>{1, 2, 3, 4});
  CHECK(back.get_i32("ids") == std::vector<int32_t>{10, -3, 7});

  ParamSet p2 = back.get_params("online");
  CHECK(p2.names == params.names);
  CHECK(p2.checksum() == params.checksum());
  CHECK(back.extras().find("42") != std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("loading a non-checkpoint file fails with a diagnostic") {
  const std::string path = "test_not_ckpt.bin";
  {
    std::ofstream f(path, std::ios::binary);
    f << "definitely not a checkpoint";
  }
  CHECK_THROWS_AS(Checkpoint::load(path), ContractError);
  std::remove(path.c_str());
}

TEST_CASE("duplicate names and missing tensors are contract violations") {
  Checkpoint ck;
  ck.put_i32("x", {1});
  CHECK_THROWS_AS(ck.put_i32("x", {2}), ContractError);
  CHECK_THROWS_AS(ck.get("y"), ContractError);
}
