#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "dnnshield/rng.hpp"

using namespace dnnshield;

// Known-answer vectors published with the Random123 reference implementation.
TEST_CASE("philox4x32-10 known answers") {
  using C = Philox4x32::Counter;
  using K = Philox4x32::Key;
  CHECK(Philox4x32::block(C{0, 0, 0, 0}, K{0, 0}) ==
        C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::block(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, K{0xffffffff, 0xffffffff}) ==
        C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::block(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}) ==
        C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams") {
  CounterRng a(7, StreamDomain::SparsityRates, 3, 1), b(7, StreamDomain::SparsityRates, 3, 1);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u32() == b.next_u32());

  std::set<std::uint32_t> firsts;
  for (std::uint32_t s = 0; s < 4; ++s)
    for (auto d : {StreamDomain::Initialization, StreamDomain::SparsityRates, StreamDomain::Attack})
      for (std::uint32_t x = 0; x < 4; ++x) firsts.insert(CounterRng(s, d, x, x + 1).next_u32());
  CHECK(firsts.size() == 48);

  CounterRng hi(std::uint64_t{1} << 32, StreamDomain::Dataset), lo(0, StreamDomain::Dataset);
  CHECK(hi.next_u32() != lo.next_u32());
}

TEST_CASE("distributions") {
  CounterRng rng(8, StreamDomain::Workload);
  double sum = 0.0, sq = 0.0;
  std::vector<int> hist(5, 0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    sum += u;
    ++hist[rng.below(5)];
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
  for (int h : hist) CHECK(std::abs(h - n / 5) < 4 * std::sqrt(n * 0.16));
  CHECK(rng.below(1) == 0);
  sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(sq / n == doctest::Approx(1.0).epsilon(0.02));
}
