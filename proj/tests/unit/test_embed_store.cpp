#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "cascade/embed_store.hpp"
#include "cascade/errors.hpp"
#include "synthetic.hpp"

using namespace cascade;
using cascade::testing::TempDir;

namespace {

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const InputError& e) {
    return e.what();
  }
  return {};
}

EmbeddingMatrix small() {
  return EmbeddingMatrix({"a", "b", "c"}, 4, {0.f, 1.f, 2.f, 3.f, 4.f, 5.f, 6.f, 7.f, 8.f, 9.f, 10.f, 11.f}, "enc");
}

}  // namespace

TEST_CASE("write then read returns the same matrix bit for bit") {
  TempDir dir;
  const auto m = small();
  write_embeddings(m, dir / "e.cgem");
  const auto back = read_embeddings(dir / "e.cgem");
  CHECK(back == m);
  CHECK(back.ids() == std::vector<std::string>{"a", "b", "c"});
  CHECK(back.encoder_tag() == "enc");
  CHECK(std::memcmp(back.values().data(), m.values().data(), m.values().size() * sizeof(float)) == 0);
}

TEST_CASE("float payload survives odd values") {
  const std::vector<float> vals = {-0.0f, std::numeric_limits<float>::denorm_min(), std::numeric_limits<float>::max(),
                                   1e-30f};
  const EmbeddingMatrix m({"x"}, 4, vals);
  const auto back = decode_embeddings(encode_embeddings(m));
  CHECK(std::memcmp(back.values().data(), vals.data(), vals.size() * sizeof(float)) == 0);
}

TEST_CASE("1x768 zero matrix file size") {
  TempDir dir;
  const std::string id = "doc-000";
  const EmbeddingMatrix m({id}, 768, std::vector<float>(768, 0.0f));
  write_embeddings(m, dir / "z.cgem");
  const std::uintmax_t header = 4 + 4 + 4 + 4 + 4 + 0;  // magic, version, n, dim, tag length, empty tag
  const std::uintmax_t ids = 4 + id.size();
  CHECK(std::filesystem::file_size(dir / "z.cgem") == header + ids + 768 * 4 + 4);
}

TEST_CASE("header is little-endian") {
  const auto bytes = encode_embeddings(small());
  REQUIRE(bytes.size() > 16);
  CHECK(std::memcmp(bytes.data(), "CGEM", 4) == 0);
  auto u32 = [&](std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | std::to_integer<std::uint32_t>(bytes[off + static_cast<std::size_t>(i)]);
    return v;
  };
  CHECK(u32(4) == kEmbeddingFormatVersion);
  CHECK(u32(8) == 3);
  CHECK(u32(12) == 4);
}

TEST_CASE("non-finite values are rejected with their position") {
  std::vector<float> vals(3 * 4, 0.5f);
  vals[1 * 4 + 2] = std::nanf("");
  const auto msg = error_of([&] { EmbeddingMatrix({"a", "b", "c"}, 4, vals); });
  CHECK(msg.find("row 1, column 2") != std::string::npos);
  vals[1 * 4 + 2] = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(EmbeddingMatrix({"a", "b", "c"}, 4, vals), InputError);
}

TEST_CASE("NaN smuggled into a file is caught on read") {
  auto bytes = encode_embeddings(small());
  // Overwrite row 1, col 2 with a NaN and leave the CRC stale: the CRC fails first.
  const std::size_t payload = bytes.size() - 4 - 12 * 4;
  const float nan = std::nanf("");
  std::memcpy(bytes.data() + payload + (1 * 4 + 2) * 4, &nan, 4);
  CHECK(error_of([&] { decode_embeddings(bytes); }).find("CRC") != std::string::npos);
}

TEST_CASE("construction invariants") {
  CHECK(error_of([] { encode_embeddings(EmbeddingMatrix({}, 3, {})); }) == "empty matrix");
  CHECK_THROWS_AS(EmbeddingMatrix({"a"}, 0, {}), InputError);
  CHECK_THROWS_AS(EmbeddingMatrix({"a", "a"}, 1, {1.f, 2.f}), InputError);
  CHECK_THROWS_AS(EmbeddingMatrix({"a"}, 2, {1.f}), InputError);
  CHECK_THROWS_AS(EmbeddingMatrix::from_rows({"a", "b"}, {{1.f, 2.f}, {3.f}}), InputError);
  CHECK(EmbeddingMatrix::from_rows({"a", "b"}, {{1.f, 2.f}, {3.f, 4.f}}).dim() == 2);
}

TEST_CASE("corruption is detected") {
  auto good = encode_embeddings(small());
  SUBCASE("bad magic") {
    good[0] = std::byte{'X'};
    CHECK(error_of([&] { decode_embeddings(good); }).find("magic") != std::string::npos);
  }
  SUBCASE("wrong version") {
    good[4] = std::byte{9};
    CHECK(error_of([&] { decode_embeddings(good); }).find("version") != std::string::npos);
  }
  SUBCASE("flipped payload bit") {
    good[good.size() - 10] ^= std::byte{0x01};
    CHECK(error_of([&] { decode_embeddings(good); }).find("CRC") != std::string::npos);
  }
  SUBCASE("truncated") {
    good.resize(good.size() - 7);
    CHECK_THROWS_AS(decode_embeddings(good), InputError);
  }
  SUBCASE("tiny") {
    good.resize(6);
    CHECK_THROWS_AS(decode_embeddings(good), InputError);
  }
}

TEST_CASE("missing file names the path") {
  TempDir dir;
  const auto msg = error_of([&] { read_embeddings(dir / "nope.cgem"); });
  CHECK(msg.find("nope.cgem") != std::string::npos);
}

TEST_CASE("align") {
  const auto m = small();
  CHECK(align(m, m.ids()) == m);
  const auto r = align(m, {"c", "b", "a"});
  CHECK(r.ids() == std::vector<std::string>{"c", "b", "a"});
  CHECK(r.row(0)[0] == 8.f);
  CHECK(r.row(2)[3] == 3.f);
  CHECK(error_of([&] { align(m, {"a", "zz"}); }).find("'zz'") != std::string::npos);
}
