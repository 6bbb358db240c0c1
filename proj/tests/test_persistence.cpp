#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "bhsrs/checkpoint.hpp"
#include "bhsrs/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bhsrs;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("bhsrs_ckpt_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::vector<char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<char>{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

NetworkConfig tiny_config(Mode mode) {
  NetworkConfig cfg;
  cfg.mode = mode;
  cfg.in_channels = 3;
  cfg.n_classes = 4;
  cfg.widths = {4, 6, 8};
  return cfg;
}

}  // namespace

TEST_CASE("hash matches published FNV-1a test vectors") {
  CHECK(fnv1a64("", 0) == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a", 1) == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar", 6) == 0x85944171f73967e8ull);
}

TEST_CASE("archive round trip preserves content and bytes") {
  TempDir dir;
  Archive a;
  a.kind = "model";
  a.meta = {{"alpha", 0.125}, {"note", "x"}, {"count", 7}};
  a.blobs.push_back({"zeta", {2, 3}, {1, 2, 3, 4, 5, 6}});
  a.blobs.push_back({"alpha", {4}, {-0.5, 0.0, 1e-300, 1e300}});
  archive_save(a, dir.file("a.bin"));

  const Archive b = archive_load(dir.file("a.bin"));
  CHECK(b.kind == "model");
  CHECK(b.meta.at("alpha").get<double>() == 0.125);
  CHECK(b.meta.at("count").get<int>() == 7);
  REQUIRE(b.blobs.size() == 2);
  // Stored sorted by name regardless of insertion order.
  CHECK(b.blobs[0].name == "alpha");
  CHECK(b.blobs[1].name == "zeta");
  CHECK(b.blob("zeta").shape == std::vector<int64_t>{2, 3});
  CHECK(b.blob("zeta").data == std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK(b.blob("alpha").data == std::vector<double>{-0.5, 0.0, 1e-300, 1e300});
  CHECK(b.has_blob("zeta"));
  CHECK(!b.has_blob("beta"));

  // Load-save is byte identical: same content can never produce two files.
  archive_save(b, dir.file("b.bin"));
  CHECK(slurp(dir.file("a.bin")) == slurp(dir.file("b.bin")));
}

TEST_CASE("archive rejects malformed inputs") {
  TempDir dir;
  Archive a;
  a.kind = "model";
  a.blobs.push_back({"x", {2}, {1, 2}});

  SUBCASE("duplicate names") {
    a.blobs.push_back({"x", {1}, {3}});
    CHECK_THROWS_AS(archive_save(a, dir.file("dup.bin")), InputError);
  }
  SUBCASE("shape size mismatch") {
    a.blobs.push_back({"y", {3}, {1, 2}});
    CHECK_THROWS_AS(archive_save(a, dir.file("shape.bin")), InputError);
  }
  SUBCASE("wrong magic") {
    std::ofstream(dir.file("junk.bin"), std::ios::binary) << "NOTBHS" << std::string(64, 'x');
    CHECK_THROWS_AS(archive_load(dir.file("junk.bin")), ParseError);
  }
  SUBCASE("truncated payload") {
    archive_save(a, dir.file("t.bin"));
    fs::resize_file(dir.file("t.bin"), fs::file_size(dir.file("t.bin")) - 8);
    CHECK_THROWS_AS(archive_load(dir.file("t.bin")), ParseError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(archive_load(dir.file("nope.bin")), IoError); }
}

TEST_CASE("model checkpoint restores configuration and every parameter") {
  TempDir dir;
  for (Mode mode : {Mode::BNN, Mode::CNN}) {
    CAPTURE(mode_name(mode));
    Rng rng(11);
    Network net(tiny_config(mode), rng);
    TrainMeta meta;
    meta.epoch = 17;
    meta.seed = 123456789ull;
    meta.val_kappa = 0.875;
    const std::string path = dir.file(cat("net_", mode_name(mode), ".bin"));
    save_model(path, net, meta);

    LoadedModel loaded = load_model(path);
    CHECK(loaded.meta.epoch == 17);
    CHECK(loaded.meta.seed == 123456789ull);
    CHECK(loaded.meta.val_kappa == 0.875);
    CHECK(!loaded.has_adam);
    CHECK(loaded.net->config().mode == mode);
    CHECK(loaded.net->config().widths == std::vector<int64_t>{4, 6, 8});

    const auto orig = net.named_params();
    const auto back = loaded.net->named_params();
    REQUIRE(orig.size() == back.size());
    for (size_t i = 0; i < orig.size(); ++i) {
      CHECK(orig[i].first == back[i].first);
      CHECK(orig[i].second.vec() == back[i].second.vec());
    }

    // Deterministic forward passes agree exactly.
    Tensor x = make_tensor({2, 3, 9, 9}, false);
    Rng data_rng(5);
    for (int64_t i = 0; i < x.numel(); ++i) x.data()[i] = data_rng.normal();
    const Tensor y0 = net.forward(x);
    const Tensor y1 = loaded.net->forward(x);
    CHECK(y0.vec() == y1.vec());
  }
}

TEST_CASE("optimizer moments survive the round trip") {
  TempDir dir;
  Rng rng(3);
  Network net(tiny_config(Mode::CNN), rng);
  Adam opt(net.named_params());

  // Produce nonzero moments with one real step.
  Tensor x = make_tensor({1, 3, 9, 9}, false);
  for (int64_t i = 0; i < x.numel(); ++i) x.data()[i] = rng.normal();
  {
    Tape tape;
    const Tensor logp = net.forward(x);
    const Tensor loss = nll_loss(logp, {1}, Reduction::Mean);
    backward(loss);
  }
  opt.step();

  const AdamState state = opt.export_state();
  TrainMeta meta;
  save_model(dir.file("opt.bin"), net, meta, &state);
  LoadedModel loaded = load_model(dir.file("opt.bin"));
  REQUIRE(loaded.has_adam);
  CHECK(loaded.adam.t == state.t);
  CHECK(loaded.adam.m == state.m);
  CHECK(loaded.adam.v == state.v);

  // The restored state drops into a fresh optimizer.
  Adam resumed(loaded.net->named_params());
  resumed.import_state(loaded.adam);
  CHECK(resumed.t() == opt.t());
}

TEST_CASE("feature cache verifies its content hash") {
  TempDir dir;
  FeatureCube cube;
  cube.h = 4;
  cube.w = 5;
  cube.bands = 2;
  cube.data.resize(40);
  Rng rng(9);
  for (auto& v : cube.data) v = rng.normal();

  nlohmann::json prov = {{"source", "unit-test"}, {"lambdas", {100, 500}}};
  save_features(dir.file("f.hsrs"), cube, prov);

  nlohmann::json prov_back;
  const FeatureCube back = load_features(dir.file("f.hsrs"), &prov_back);
  CHECK(back.h == 4);
  CHECK(back.w == 5);
  CHECK(back.bands == 2);
  CHECK(back.data == cube.data);
  CHECK(prov_back == prov);

  // Flip one payload byte: the loader must notice.
  {
    std::fstream f(dir.file("f.hsrs"), std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(-3, std::ios::end);
    char c;
    f.seekg(-3, std::ios::end);
    f.read(&c, 1);
    c = static_cast<char>(c ^ 0x40);
    f.seekp(-3, std::ios::end);
    f.write(&c, 1);
  }
  CHECK_THROWS_AS(load_features(dir.file("f.hsrs")), ParseError);

  // A model file is not a feature cache.
  Rng nrng(1);
  Network net(tiny_config(Mode::CNN), nrng);
  save_model(dir.file("m.bin"), net, {});
  CHECK_THROWS_AS(load_features(dir.file("m.bin")), ParseError);
  CHECK_THROWS_AS(load_model(dir.file("f.hsrs")), ParseError);
}
