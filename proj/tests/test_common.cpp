#include <doctest.h>

#include <atomic>
#include <numeric>
#include <set>

#include "oracles.hpp"
#include "regconv/common.hpp"

using namespace regconv;

TEST_CASE("sha256 of known strings") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("rng is reproducible and in range") {
  Rng a(7), b(7), c(8);
  std::vector<std::uint64_t> xa, xb, xc;
  for (int i = 0; i < 16; ++i) {
    xa.push_back(a.next_u64());
    xb.push_back(b.next_u64());
    xc.push_back(c.next_u64());
  }
  CHECK(xa == xb);
  CHECK(xa != xc);

  Rng r(1);
  std::vector<int> hits(5, 0);
  for (int i = 0; i < 5000; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    ++hits[r.index(5)];
  }
  for (int h : hits) CHECK(h > 800);
}

TEST_CASE("gaussian moments") {
  Rng r(3);
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double g = r.gaussian();
    sum += g;
    sq += g * g;
  }
  CHECK(std::abs(sum / n) < 0.03);
  CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("shuffle is a permutation") {
  Rng r(11);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  r.shuffle(v);
  CHECK(std::set<int>(v.begin(), v.end()).size() == 50);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted[0] == 0);
  CHECK(sorted[49] == 49);
}

TEST_CASE("parallel_for visits every index once for any thread count") {
  for (unsigned t : {1u, 2u, 8u}) {
    set_thread_count(t);
    std::vector<std::atomic<int>> seen(1000);
    parallel_for(seen.size(), [&](std::size_t i) { seen[i]++; });
    for (auto& s : seen) CHECK(s.load() == 1);
  }
  set_thread_count(0);
  CHECK(thread_count() >= 1);
}

TEST_CASE("parallel_for rethrows worker errors") {
  set_thread_count(4);
  CHECK_THROWS_AS(parallel_for(100, [](std::size_t i) {
                    if (i == 57) throw DataError("boom");
                  }),
                  DataError);
  set_thread_count(0);
}

TEST_CASE("normalize and dot") {
  std::vector<double> v{3.0, 4.0};
  CHECK(normalize_in_place(v));
  CHECK(v[0] == doctest::Approx(0.6));
  CHECK(l2_norm(v) == doctest::Approx(1.0));
  std::vector<double> z{0.0, 0.0};
  CHECK_FALSE(normalize_in_place(z));
  CHECK(z == std::vector<double>{0.0, 0.0});
}

TEST_CASE("file helpers") {
  oracle::TempDir dir("common");
  const std::string p = dir / "a/b/c.txt";
  write_file(p, "hello");
  CHECK(read_file(p) == "hello");
  CHECK(sha256_file(p) == sha256_hex("hello"));
  CHECK_THROWS_AS(read_file(dir / "missing"), DataError);
}

TEST_CASE("format_fixed") {
  CHECK(format_fixed(0.123456, 4) == "0.1235");
  CHECK(format_fixed(-0.00001, 4) == "0.0000");
  CHECK(format_fixed(-1.5, 1) == "-1.5");
  CHECK(trim("  x y \n") == "x y");
}
