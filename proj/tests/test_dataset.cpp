#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "bhsrs/envi.hpp"
#include "bhsrs/patches.hpp"
#include "bhsrs/rng.hpp"
#include "bhsrs/split.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bhsrs;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("bhsrs_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int n = 0;
    return n;
  }
};

HyperCube test_cube(int64_t h, int64_t w, int64_t bands, bool integral) {
  HyperCube cube;
  cube.h = h;
  cube.w = w;
  cube.bands = bands;
  cube.data.resize(static_cast<size_t>(h * w * bands));
  Rng rng(7);
  for (auto& v : cube.data) {
    // Integral payloads survive int16/uint16 narrowing; the fractional ones
    // use multiples of 1/8, exact in float32.
    v = integral ? static_cast<double>(rng.integer(200)) : static_cast<double>(rng.integer(1600)) / 8.0;
  }
  return cube;
}

LabelMap make_labels(int64_t h, int64_t w, const std::vector<int32_t>& values) {
  LabelMap m;
  m.h = h;
  m.w = w;
  m.data = values;
  return m;
}

}  // namespace

TEST_CASE("ENVI round trip across data types, interleaves and byte orders") {
  TempDir dir;
  for (int dtype : {2, 4, 12}) {
    for (const char* il : {"bsq", "bil", "bip"}) {
      for (int bo : {0, 1}) {
        CAPTURE(dtype);
        CAPTURE(il);
        CAPTURE(bo);
        const HyperCube cube = test_cube(5, 7, 3, dtype != 4);
        EnviWriteOptions opt;
        opt.data_type = dtype;
        opt.interleave = il;
        opt.byte_order = bo;
        const std::string data_path = dir.file(cat("img_", dtype, "_", il, "_", bo, ".raw"));
        envi_write(data_path, cube, opt);

        const HyperCube back = envi_read(data_path);
        REQUIRE(back.h == cube.h);
        REQUIRE(back.w == cube.w);
        REQUIRE(back.bands == cube.bands);
        for (size_t i = 0; i < cube.data.size(); ++i) {
          CHECK(back.data[i] == cube.data[i]);
        }

        // The header path resolves to the same pair.
        const HyperCube via_hdr = envi_read(data_path + ".hdr");
        CHECK(via_hdr.data == back.data);
      }
    }
  }
}

TEST_CASE("ENVI int16 holds negative values") {
  TempDir dir;
  HyperCube cube;
  cube.h = 1;
  cube.w = 4;
  cube.bands = 1;
  cube.data = {-32768.0, -1.0, 0.0, 32767.0};
  EnviWriteOptions opt;
  opt.data_type = 2;
  envi_write(dir.file("neg.raw"), cube, opt);
  CHECK(envi_read(dir.file("neg.raw")).data == cube.data);

  cube.data = {0.0, 0.0, 0.0, 32768.0};
  CHECK_THROWS_AS(envi_write(dir.file("over.raw"), cube, opt), InputError);
  opt.data_type = 12;
  cube.data = {0.0, 0.0, 0.0, -1.0};
  CHECK_THROWS_AS(envi_write(dir.file("under.raw"), cube, opt), InputError);
}

TEST_CASE("ENVI integer write rounds to nearest") {
  TempDir dir;
  HyperCube cube;
  cube.h = 1;
  cube.w = 4;
  cube.bands = 1;
  cube.data = {1.4, 1.6, -2.7, 100.49};
  EnviWriteOptions opt;
  opt.data_type = 2;
  envi_write(dir.file("round.raw"), cube, opt);
  const HyperCube back = envi_read(dir.file("round.raw"));
  CHECK(back.data == std::vector<double>{1.0, 2.0, -3.0, 100.0});
}

TEST_CASE("ENVI header parser handles case, spacing and brace values") {
  const std::string text =
      "ENVI\n"
      "description = {\n"
      "  two line\n"
      "  value}\n"
      "Samples = 7\n"
      "LINES=5\n"
      "bands = 3\n"
      "Data Type = 4\n"
      "interleave = BSQ\n"
      "byte order = 0\n";
  const auto kv = envi_parse_header(text);
  CHECK(kv.at("samples") == "7");
  CHECK(kv.at("lines") == "5");
  CHECK(kv.at("data type") == "4");
  CHECK(kv.at("description").find("two line") != std::string::npos);
}

TEST_CASE("ENVI reader rejects broken inputs") {
  TempDir dir;
  CHECK_THROWS_AS(envi_parse_header("samples = 7\n"), ParseError);  // no magic

  // Valid pair, then break it in targeted ways.
  const HyperCube cube = test_cube(3, 3, 2, true);
  const std::string raw = dir.file("img.raw");
  envi_write(raw, cube, {});

  SUBCASE("data file shorter than the header promises") {
    fs::resize_file(raw, fs::file_size(raw) - 4);
    CHECK_THROWS_AS(envi_read(raw), IoError);
  }
  SUBCASE("unsupported data type") {
    std::string hdr_text;
    {
      std::ifstream in(raw + ".hdr");
      hdr_text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    size_t at = hdr_text.find("data type = 4");
    REQUIRE(at != std::string::npos);
    hdr_text.replace(at, 13, "data type = 5");
    std::ofstream(raw + ".hdr") << hdr_text;
    CHECK_THROWS_AS(envi_read(raw), ParseError);
  }
  SUBCASE("missing required key") {
    std::ofstream(raw + ".hdr") << "ENVI\nsamples = 3\nlines = 3\n";
    CHECK_THROWS_AS(envi_read(raw), ParseError);
  }
  SUBCASE("missing mate files") {
    CHECK_THROWS_AS(envi_read(dir.file("absent.raw")), IoError);
    std::ofstream(dir.file("orphan.hdr")) << "ENVI\n";
    CHECK_THROWS_AS(envi_read(dir.file("orphan.hdr")), IoError);
  }
}

TEST_CASE("PGM round trip, one and two byte samples") {
  TempDir dir;
  SUBCASE("small class ids stay single byte") {
    const LabelMap m = make_labels(2, 3, {0, 1, 2, 3, 0, 255});
    pgm_write(dir.file("a.pgm"), m);
    const LabelMap back = pgm_read(dir.file("a.pgm"));
    CHECK(back.h == 2);
    CHECK(back.w == 3);
    CHECK(back.data == m.data);
    CHECK(fs::file_size(dir.file("a.pgm")) < 32);  // header + 6 bytes
  }
  SUBCASE("class ids beyond 255 force two byte samples") {
    const LabelMap m = make_labels(2, 2, {0, 256, 60000, 65535});
    pgm_write(dir.file("b.pgm"), m);
    CHECK(pgm_read(dir.file("b.pgm")).data == m.data);
  }
  SUBCASE("class ids beyond 16 bits are refused") {
    const LabelMap m = make_labels(1, 1, {65536});
    CHECK_THROWS_AS(pgm_write(dir.file("c.pgm"), m), InputError);
  }
}

TEST_CASE("PGM reader accepts comments and tight whitespace") {
  TempDir dir;
  {
    std::ofstream out(dir.file("d.pgm"), std::ios::binary);
    out << "P5 # magic\n# a comment line\n3 # width\n 2\n255\n";
    const char px[6] = {1, 2, 3, 4, 5, 6};
    out.write(px, 6);
  }
  const LabelMap m = pgm_read(dir.file("d.pgm"));
  CHECK(m.w == 3);
  CHECK(m.h == 2);
  CHECK(m.data == std::vector<int32_t>{1, 2, 3, 4, 5, 6});

  std::ofstream(dir.file("e.pgm"), std::ios::binary) << "P2\n1 1\n255\n0";
  CHECK_THROWS_AS(pgm_read(dir.file("e.pgm")), ParseError);
}

namespace {

// 12x12 map, class 1 fills rows 0..5, class 2 rows 6..11. Both components
// are large enough for any pixels_per_class used below.
LabelMap two_block_labels() {
  LabelMap m;
  m.h = 12;
  m.w = 12;
  m.data.assign(144, 1);
  for (int64_t p = 72; p < 144; ++p) m.data[static_cast<size_t>(p)] = 2;
  return m;
}

int64_t role_count_for_class(const LabelMap& m, const Split& s, int32_t cls, Role r) {
  int64_t n = 0;
  for (int64_t p = 0; p < m.pixels(); ++p) {
    n += (m.data[static_cast<size_t>(p)] == cls && s.at(p) == r);
  }
  return n;
}

// True when the class's training pixels form one 4-connected component.
bool train_connected(const LabelMap& m, const Split& s, int32_t cls) {
  std::vector<int64_t> sel;
  for (int64_t p = 0; p < m.pixels(); ++p) {
    if (m.data[static_cast<size_t>(p)] == cls && s.at(p) == Role::Train) sel.push_back(p);
  }
  if (sel.empty()) return true;
  std::set<int64_t> remaining(sel.begin(), sel.end());
  std::vector<int64_t> stack{sel[0]};
  remaining.erase(sel[0]);
  while (!stack.empty()) {
    const int64_t p = stack.back();
    stack.pop_back();
    const int64_t y = p / m.w, x = p % m.w;
    const int64_t nbs[4] = {p - m.w, p + m.w, p - 1, p + 1};
    const bool ok[4] = {y > 0, y < m.h - 1, x > 0, x < m.w - 1};
    for (int i = 0; i < 4; ++i) {
      if (ok[i] && remaining.count(nbs[i])) {
        remaining.erase(nbs[i]);
        stack.push_back(nbs[i]);
      }
    }
  }
  return remaining.empty();
}

}  // namespace

TEST_CASE("compact split takes a connected training component per class") {
  const LabelMap m = two_block_labels();
  const Split s = cc_train_split(m, 10, 0.25, 42);
  CHECK(s.policy == "cc");
  CHECK(s.flagged_classes.empty());
  for (int32_t c : {1, 2}) {
    CHECK(role_count_for_class(m, s, c, Role::Train) == 10);
    CHECK(train_connected(m, s, c));
    // 62 labeled pixels remain; llround(0.25 * 62) = 16 go to validation.
    CHECK(role_count_for_class(m, s, c, Role::Val) == 16);
    CHECK(role_count_for_class(m, s, c, Role::Test) == 46);
  }
  // Roles appear only on labeled pixels (the map is fully labeled here, so
  // check the complementary invariant: every labeled pixel got a role).
  CHECK(s.count(Role::None) == 0);
}

TEST_CASE("splits are deterministic in the seed") {
  const LabelMap m = two_block_labels();
  const Split a = cc_train_split(m, 10, 0.25, 7);
  const Split b = cc_train_split(m, 10, 0.25, 7);
  CHECK(a.roles == b.roles);
  const Split c = cc_train_split(m, 10, 0.25, 8);
  CHECK(a.roles != c.roles);

  const Split ra = random_train_split(m, 10, 0.25, 7);
  const Split rb = random_train_split(m, 10, 0.25, 7);
  CHECK(ra.roles == rb.roles);
}

TEST_CASE("unlabeled pixels never receive a role") {
  LabelMap m = two_block_labels();
  for (int64_t p = 0; p < 144; p += 3) m.data[static_cast<size_t>(p)] = 0;
  for (const Split& s : {cc_train_split(m, 5, 0.2, 1), random_train_split(m, 5, 0.2, 1)}) {
    for (int64_t p = 0; p < m.pixels(); ++p) {
      if (m.data[static_cast<size_t>(p)] == 0) CHECK(s.at(p) == Role::None);
    }
  }
}

TEST_CASE("classes with only small components are flagged and keep the largest") {
  // Class 2: an isolated 3-pixel strip plus two lone pixels, far apart.
  LabelMap m;
  m.h = 8;
  m.w = 8;
  m.data.assign(64, 1);
  m.data[0] = 2;                       // lone
  m.data[63] = 2;                      // lone
  m.data[3 * 8 + 2] = 2;               // strip of 3
  m.data[3 * 8 + 3] = 2;
  m.data[3 * 8 + 4] = 2;
  const Split s = cc_train_split(m, 5, 0.0, 3);
  REQUIRE(s.flagged_classes == std::vector<int32_t>{2});
  CHECK(role_count_for_class(m, s, 2, Role::Train) == 3);
  CHECK(s.at(3 * 8 + 2) == Role::Train);
  CHECK(s.at(3 * 8 + 3) == Role::Train);
  CHECK(s.at(3 * 8 + 4) == Role::Train);
  CHECK(role_count_for_class(m, s, 1, Role::Train) == 5);

  // The random policy flags only when the whole class is too small.
  const Split r = random_train_split(m, 5, 0.0, 3);
  CHECK(r.flagged_classes.empty());
  CHECK(role_count_for_class(m, r, 2, Role::Train) == 5);
  const Split r2 = random_train_split(m, 6, 0.0, 3);
  CHECK(r2.flagged_classes == std::vector<int32_t>{2});
  CHECK(role_count_for_class(m, r2, 2, Role::Train) == 5);
}

TEST_CASE("split JSON round trip is exact") {
  TempDir dir;
  LabelMap m = two_block_labels();
  m.data[5] = 0;
  const Split s = cc_train_split(m, 7, 0.3, 99);
  split_save(s, dir.file("split.json"));
  const Split back = split_load(dir.file("split.json"));
  CHECK(back.h == s.h);
  CHECK(back.w == s.w);
  CHECK(back.roles == s.roles);
  CHECK(back.policy == s.policy);
  CHECK(back.seed == s.seed);
  CHECK(back.pixels_per_class == s.pixels_per_class);
  CHECK(back.val_fraction == s.val_fraction);
  CHECK(back.flagged_classes == s.flagged_classes);
}

TEST_CASE("split loader rejects malformed files") {
  TempDir dir;
  std::ofstream(dir.file("bad1.json")) << "{\"kind\": \"other\"}";
  CHECK_THROWS_AS(split_load(dir.file("bad1.json")), ParseError);
  std::ofstream(dir.file("bad2.json")) << "not json";
  CHECK_THROWS_AS(split_load(dir.file("bad2.json")), ParseError);
  std::ofstream(dir.file("bad3.json"))
      << R"({"kind":"split","h":2,"w":2,"policy":"cc","seed":0,"pixels_per_class":1,)"
      << R"("val_fraction":0.0,"flagged_classes":[],"roles_rle":[[1,3]]})";
  CHECK_THROWS_AS(split_load(dir.file("bad3.json")), ParseError);  // covers 3 of 4 pixels
  CHECK_THROWS_AS(split_load(dir.file("missing.json")), IoError);
}

TEST_CASE("split argument validation") {
  const LabelMap m = two_block_labels();
  CHECK_THROWS_AS(cc_train_split(m, 0, 0.2, 1), InputError);
  CHECK_THROWS_AS(cc_train_split(m, 5, 1.0, 1), InputError);
  CHECK_THROWS_AS(cc_train_split(m, 5, -0.1, 1), InputError);
  LabelMap empty = make_labels(2, 2, {0, 0, 0, 0});
  CHECK_THROWS_AS(cc_train_split(empty, 5, 0.2, 1), InputError);
}

namespace {

// Reference for the separation histogram: for every evaluation pixel, scan
// all training pixels of its class and take the smallest Chebyshev distance.
OverlapHistogram brute_overlap(const LabelMap& m, const Split& s) {
  OverlapHistogram hist;
  for (int64_t p = 0; p < m.pixels(); ++p) {
    const Role r = s.at(p);
    if (r != Role::Val && r != Role::Test) continue;
    ++hist.total;
    const int32_t cls = m.data[static_cast<size_t>(p)];
    int64_t best = -1;
    for (int64_t q = 0; q < m.pixels(); ++q) {
      if (m.data[static_cast<size_t>(q)] != cls || s.at(q) != Role::Train) continue;
      const int64_t d = std::max(std::abs(p / m.w - q / m.w), std::abs(p % m.w - q % m.w));
      if (best < 0 || d < best) best = d;
    }
    if (best < 0) {
      ++hist.unreachable;
      continue;
    }
    if (best >= static_cast<int64_t>(hist.counts.size())) {
      hist.counts.resize(static_cast<size_t>(best) + 1, 0);
    }
    ++hist.counts[static_cast<size_t>(best)];
  }
  return hist;
}

}  // namespace

TEST_CASE("training distance histogram matches exhaustive search") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    CAPTURE(trial);
    LabelMap m;
    m.h = 14;
    m.w = 11;
    m.data.resize(154);
    for (auto& v : m.data) v = static_cast<int32_t>(rng.integer(4));  // 0..3, 0 unlabeled
    Split s;
    s.h = m.h;
    s.w = m.w;
    s.roles.assign(154, 0);
    for (int64_t p = 0; p < 154; ++p) {
      if (m.data[static_cast<size_t>(p)] > 0) {
        s.roles[static_cast<size_t>(p)] = static_cast<uint8_t>(rng.integer(4));
      }
    }
    const OverlapHistogram got = overlap_histogram(m, s);
    const OverlapHistogram want = brute_overlap(m, s);
    CHECK(got.total == want.total);
    CHECK(got.unreachable == want.unreachable);
    CHECK(got.counts == want.counts);
  }
}

TEST_CASE("fraction_below counts strictly closer pixels") {
  OverlapHistogram h;
  h.counts = {2, 0, 3, 5};
  h.total = 12;  // includes 2 unreachable
  h.unreachable = 2;
  CHECK(h.fraction_below(1) == doctest::Approx(2.0 / 12.0));
  CHECK(h.fraction_below(3) == doctest::Approx(5.0 / 12.0));
  CHECK(h.fraction_below(100) == doctest::Approx(10.0 / 12.0));
  CHECK(h.fraction_below(0) == 0.0);
  CHECK(OverlapHistogram{}.fraction_below(5) == 0.0);
}

TEST_CASE("compact splits separate evaluation pixels farther than random ones") {
  // One solid 40x40 class: a compact training blob leaves most evaluation
  // pixels far away, random training pixels sit next to everything.
  LabelMap m;
  m.h = 40;
  m.w = 40;
  m.data.assign(1600, 1);
  const Split cc = cc_train_split(m, 100, 0.0, 5);
  const Split rnd = random_train_split(m, 100, 0.0, 5);
  const double f_cc = overlap_histogram(m, cc).fraction_below(5);
  const double f_rnd = overlap_histogram(m, rnd).fraction_below(5);
  CHECK(f_cc < f_rnd);
}

TEST_CASE("patch extraction mirrors across the border without repeating it") {
  FeatureCube cube;
  cube.h = 3;
  cube.w = 3;
  cube.bands = 1;
  cube.data = {1, 2, 3, 4, 5, 6, 7, 8, 9};

  const Tensor corner = extract_patch(cube, 0, 0, 3);
  CHECK(corner.vec() == std::vector<double>{5, 4, 5, 2, 1, 2, 5, 4, 5});

  const Tensor center = extract_patch(cube, 1, 1, 3);
  CHECK(center.vec() == std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9});

  // Overhang of 2 on a 3-wide image still resolves with one reflection:
  // row -2 mirrors to row 2, column -2 to column 2.
  const Tensor wide = extract_patch(cube, 0, 0, 5);
  REQUIRE(wide.shape() == Shape{1, 5, 5});
  const std::vector<double> top(wide.vec().begin(), wide.vec().begin() + 5);
  CHECK(top == std::vector<double>{9, 8, 7, 8, 9});
}

TEST_CASE("patch extraction validates geometry") {
  FeatureCube cube;
  cube.h = 2;
  cube.w = 2;
  cube.bands = 1;
  cube.data = {1, 2, 3, 4};
  CHECK_THROWS_AS(extract_patch(cube, 0, 0, 4), InputError);   // even
  CHECK_THROWS_AS(extract_patch(cube, 0, 0, 5), InputError);   // image too small
  CHECK_THROWS_AS(extract_patch(cube, 2, 0, 3), InputError);   // center outside
  CHECK_NOTHROW(extract_patch(cube, 1, 1, 3));
}

TEST_CASE("batch extraction matches single patches and keeps label order") {
  FeatureCube cube;
  cube.h = 6;
  cube.w = 5;
  cube.bands = 2;
  cube.data.resize(60);
  Rng rng(3);
  for (auto& v : cube.data) v = rng.normal();
  const std::vector<Sample> samples = {{0, 0, 2}, {3, 2, 0}, {5, 4, 1}};
  const Tensor batch = extract_patches(cube, samples, 0, 3, 3);
  REQUIRE(batch.shape() == Shape{3, 2, 3, 3});
  for (int64_t s = 0; s < 3; ++s) {
    const Tensor one = extract_patch(cube, samples[static_cast<size_t>(s)].y,
                                     samples[static_cast<size_t>(s)].x, 3);
    for (int64_t i = 0; i < 18; ++i) {
      CHECK(batch.vec()[static_cast<size_t>(s * 18 + i)] == one.vec()[static_cast<size_t>(i)]);
    }
  }
  CHECK(batch_labels(samples, 0, 3) == std::vector<int32_t>{2, 0, 1});
  CHECK(batch_labels(samples, 1, 2) == std::vector<int32_t>{0, 1});
  CHECK_THROWS_AS(batch_labels(samples, 2, 2), InputError);
}

TEST_CASE("role extraction yields zero based labels in scan order") {
  LabelMap m = make_labels(2, 3, {0, 1, 2, 2, 0, 3});
  Split s;
  s.h = 2;
  s.w = 3;
  s.roles = {0, 1, 3, 3, 0, 1};
  const auto train = samples_for_role(m, s, Role::Train);
  REQUIRE(train.size() == 2);
  CHECK(train[0].y == 0);
  CHECK(train[0].x == 1);
  CHECK(train[0].label == 0);
  CHECK(train[1].y == 1);
  CHECK(train[1].x == 2);
  CHECK(train[1].label == 2);
  const auto test = samples_for_role(m, s, Role::Test);
  REQUIRE(test.size() == 2);
  CHECK(test[0].label == 1);
}

namespace {

std::vector<double> orientations_of_base() {
  // All 8 symmetries of [[1,2,3],[4,5,6],[7,8,9]], hand enumerated:
  // 4 counterclockwise rotations, then the same after an up-down flip.
  return {
      1, 2, 3, 4, 5, 6, 7, 8, 9,  //
      3, 6, 9, 2, 5, 8, 1, 4, 7,  //
      9, 8, 7, 6, 5, 4, 3, 2, 1,  //
      7, 4, 1, 8, 5, 2, 9, 6, 3,  //
      7, 8, 9, 4, 5, 6, 1, 2, 3,  //
      9, 6, 3, 8, 5, 2, 7, 4, 1,  //
      3, 2, 1, 6, 5, 4, 9, 8, 7,  //
      1, 4, 7, 2, 5, 8, 3, 6, 9,  //
  };
}

}  // namespace

TEST_CASE("augmentation covers exactly the 8 square symmetries") {
  const std::vector<double> all = orientations_of_base();
  std::set<std::vector<double>> expected;
  for (int k = 0; k < 8; ++k) {
    expected.insert(std::vector<double>(all.begin() + k * 9, all.begin() + (k + 1) * 9));
  }
  REQUIRE(expected.size() == 8);

  // 400 copies of the base patch: every orientation should appear and
  // nothing outside the set ever does.
  Tensor batch = make_tensor({400, 1, 3, 3}, false);
  for (int64_t s = 0; s < 400; ++s) {
    for (int64_t i = 0; i < 9; ++i) batch.data()[s * 9 + i] = static_cast<double>(i + 1);
  }
  Rng rng(17);
  augment_patches(batch, rng);
  std::set<std::vector<double>> seen;
  for (int64_t s = 0; s < 400; ++s) {
    seen.insert(std::vector<double>(batch.vec().begin() + s * 9, batch.vec().begin() + (s + 1) * 9));
  }
  CHECK(seen == expected);
}

TEST_CASE("augmentation applies one transform across all channels") {
  Tensor batch = make_tensor({64, 2, 3, 3}, false);
  for (int64_t s = 0; s < 64; ++s) {
    for (int64_t i = 0; i < 9; ++i) {
      batch.data()[s * 18 + i] = static_cast<double>(i + 1);
      batch.data()[s * 18 + 9 + i] = static_cast<double>(i + 1) + 100.0;
    }
  }
  Rng rng(5);
  augment_patches(batch, rng);
  for (int64_t s = 0; s < 64; ++s) {
    for (int64_t i = 0; i < 9; ++i) {
      CHECK(batch.vec()[static_cast<size_t>(s * 18 + 9 + i)] ==
            batch.vec()[static_cast<size_t>(s * 18 + i)] + 100.0);
    }
  }
}

TEST_CASE("augmentation is deterministic per seed and validates shape") {
  Tensor a = make_tensor({8, 1, 3, 3}, false);
  for (int64_t i = 0; i < 72; ++i) a.data()[i] = static_cast<double>(i);
  Tensor b = a.clone();
  Rng r1(9), r2(9);
  augment_patches(a, r1);
  augment_patches(b, r2);
  CHECK(a.vec() == b.vec());

  Tensor bad = make_tensor({2, 1, 3, 4}, false);
  Rng r3(0);
  CHECK_THROWS_AS(augment_patches(bad, r3), InputError);
}
