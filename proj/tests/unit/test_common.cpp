#include <doctest.h>

#include <set>

#include "agentab/common.hpp"

using namespace agentab;

TEST_CASE("sha256 matches known digests") {
  CHECK(Sha256Hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(Sha256Hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("derived seeds depend on both parent and label") {
  CHECK(DeriveSeed(1, "p0001") == DeriveSeed(1, "p0001"));
  CHECK(DeriveSeed(1, "p0001") != DeriveSeed(2, "p0001"));
  CHECK(DeriveSeed(1, "p0001") != DeriveSeed(1, "p0002"));
}

TEST_CASE("uniform helpers stay in range and replay") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = Uniform01(a);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(u == Uniform01(b));
  }
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto k = UniformBelow(a, 7);
    CHECK(k < 7);
    seen.insert(k);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("normal draws have the requested moments") {
  Rng rng(7);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = Normal(rng, 3.0, 2.0);
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(mean == doctest::Approx(3.0).epsilon(0.01));
  CHECK(var == doctest::Approx(4.0).epsilon(0.02));
}

TEST_CASE("shuffle is a seeded permutation") {
  std::vector<int> v(50), w;
  for (int i = 0; i < 50; ++i) v[i] = i;
  w = v;
  Rng r1(5), r2(5);
  Shuffle(v, r1);
  Shuffle(w, r2);
  CHECK(v == w);
  std::set<int> s(v.begin(), v.end());
  CHECK(s.size() == 50);
}

TEST_CASE("keyed uniform is a pure function of the key") {
  CHECK(KeyedUniform("a/b/1") == KeyedUniform("a/b/1"));
  CHECK(KeyedUniform("a/b/1") != KeyedUniform("a/b/2"));
  int below = 0;
  for (int i = 0; i < 10000; ++i) below += KeyedUniform("k" + std::to_string(i)) < 0.3;
  CHECK(below == doctest::Approx(3000).epsilon(0.06));
}

TEST_CASE("first number handles grouping, currency and words") {
  CHECK(*FirstNumber("$1,055.14 each") == doctest::Approx(1055.14));
  CHECK(*FirstNumber("4.5 out of 5 stars") == doctest::Approx(4.5));
  CHECK(*FirstNumber("12,345 ratings") == doctest::Approx(12345));
  CHECK(*FirstNumber("Income: $70,000 (variable)") == doctest::Approx(70000));
  CHECK(*FirstNumber("-3") == doctest::Approx(3));
  CHECK_FALSE(FirstNumber("no digits here").has_value());
}

TEST_CASE("string helpers") {
  CHECK(ToLower("MiXeD") == "mixed");
  CHECK(Trim("  \t x y \n") == "x y");
  CHECK(FormatFixed(2.0 / 3.0, 3) == "0.667");
  CHECK(FormatFixed(-0.5, 0).size() > 0);
}
