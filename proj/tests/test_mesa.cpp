// Copyright 2026 The spanet-desk Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <random>

#include "doctest.h"
#include "spanet/error.hpp"
#include "spanet/mesa.hpp"
#include "test_util.hpp"

using namespace spanet;
using testutil::RandomMap;
using testutil::RectSum;

namespace {

// Every rectangle summed from scratch.
double NaiveMesa(const DensityMap& p, const DensityMap& g) {
  const DensityMap d = p - g;
  double best = 0.0;
  for (int t = 0; t < d.height(); ++t)
    for (int b = t; b < d.height(); ++b)
      for (int l = 0; l < d.width(); ++l)
        for (int r = l; r < d.width(); ++r) best = std::max(best, std::fabs(RectSum(d, t, l, b, r)));
  return best;
}

}  // namespace

TEST_SUITE("mesa") {
  TEST_CASE("identical maps give zero at the top-left pixel") {
    std::mt19937_64 rng(1);
    const DensityMap m = RandomMap(rng, 5, 6);
    const MesaResult r = MesaExcessExact(m, m);
    CHECK(r.value == 0.0);
    CHECK(r.region == RectRegion{0, 0, 0, 0});
    CHECK(MesaExcessBruteforce(m, m) == 0.0);
  }

  TEST_CASE("single pixel") {
    const DensityMap p(1, 1, std::vector<double>{2.0});
    const DensityMap g(1, 1, std::vector<double>{1.0});
    const MesaResult r = MesaExcessExact(p, g);
    CHECK(r.value == 1.0);
    CHECK(r.region == RectRegion{0, 0, 0, 0});
    CHECK(MesaExcessBruteforce(p, g) == 1.0);
  }

  TEST_CASE("dimension mismatch and empty batches are errors") {
    CHECK_THROWS_AS(MesaExcessExact(DensityMap(2, 3), DensityMap(3, 2)), Error);
    CHECK_THROWS_AS(MesaExcessBruteforce(DensityMap(2, 3), DensityMap(2, 2)), Error);
    CHECK_THROWS_AS(MesaLossBatch({}, {}), Error);
  }

  TEST_CASE("library brute force agrees with from-scratch rectangle sums") {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> dim(1, 9);
    for (int trial = 0; trial < 60; ++trial) {
      const int h = dim(rng), w = dim(rng);
      const DensityMap p = RandomMap(rng, h, w), g = RandomMap(rng, h, w);
      CHECK(std::fabs(MesaExcessBruteforce(p, g) - NaiveMesa(p, g)) <= 1e-12);
    }
  }

  TEST_CASE("exact DP equals brute force on 200 random 8..12 pairs") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> dim(8, 12);
    for (int trial = 0; trial < 200; ++trial) {
      const int h = dim(rng), w = dim(rng);
      const DensityMap p = RandomMap(rng, h, w), g = RandomMap(rng, h, w);
      const MesaResult exact = MesaExcessExact(p, g);
      const MesaResult brute = MesaExcessBruteforceWithRegion(p, g);
      CHECK(std::fabs(exact.value - brute.value) <= 1e-9);
      // The reported rectangle attains the value.
      const DensityMap d = p - g;
      const RectRegion& b = exact.region;
      CHECK(std::fabs(std::fabs(RectSum(d, b.top, b.left, b.bottom, b.right)) - exact.value) <= 1e-9);
    }
  }

  TEST_CASE("ties resolve to the smallest area then lexicographic order") {
    // A +1 and a -1 pixel; each alone attains 1, as does any rectangle
    // padding one of them with zeros. The single pixel at (1, 1) wins.
    DensityMap p(4, 4), g(4, 4);
    p(1, 1) = 1.0;
    g(2, 3) = 1.0;
    const MesaResult r = MesaExcessExact(p, g);
    CHECK(r.value == 1.0);
    CHECK(r.region == RectRegion{1, 1, 1, 1});
    CHECK(MesaExcessBruteforceWithRegion(p, g).region == r.region);

    // Opposite sign parts tie: the negative part wins only by area/order.
    DensityMap q(2, 3);
    q(1, 2) = 2.0;
    q(0, 0) = -2.0;
    const MesaResult s = MesaExcessExact(q, DensityMap(2, 3));
    CHECK(s.value == 2.0);
    CHECK(s.region == RectRegion{0, 0, 0, 0});
  }

  TEST_CASE("threaded reduction is bit-identical to the sequential run") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
      const DensityMap p = RandomMap(rng, 23, 17), g = RandomMap(rng, 23, 17);
      const MesaResult a = MesaExcessExact(p, g, 1);
      for (int workers : {2, 3, 8}) {
        const MesaResult b = MesaExcessExact(p, g, workers);
        CHECK(a.value == b.value);
        CHECK(a.region == b.region);
      }
    }
  }

  TEST_CASE("batch mean") {
    std::mt19937_64 rng(5);
    const DensityMap p = RandomMap(rng, 6, 6), g = RandomMap(rng, 6, 6);
    const double single = MesaExcessExact(p, g).value;
    CHECK(MesaLossBatch(std::vector{p}, std::vector{g}) == single);
    CHECK(MesaLossBatch(std::vector{p, p}, std::vector{g, g}) == doctest::Approx(single).epsilon(1e-15));
    std::vector<DensityMap> ps, gs;
    double mean = 0.0;
    for (int i = 0; i < 5; ++i) {
      ps.push_back(RandomMap(rng, 7, 9));
      gs.push_back(RandomMap(rng, 7, 9));
      mean += MesaExcessBruteforce(ps.back(), gs.back()) / 5.0;
    }
    CHECK(std::fabs(MesaLossBatch(ps, gs) - mean) <= 1e-9);
    CHECK_THROWS_AS(MesaLossBatch(ps, std::vector<DensityMap>(gs.begin(), gs.begin() + 4)), Error);
  }

  TEST_CASE("property: symmetry, shift invariance, zero padding, upper bound") {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int> dim(2, 12);
    std::uniform_real_distribution<double> shift(-5.0, 5.0);
    for (int trial = 0; trial < 100; ++trial) {
      const int h = dim(rng), w = dim(rng);
      const DensityMap p = RandomMap(rng, h, w), g = RandomMap(rng, h, w);
      const double v = MesaExcessExact(p, g).value;
      CHECK(MesaExcessExact(g, p).value == doctest::Approx(v).epsilon(1e-12));

      const double c = shift(rng);
      DensityMap pc = p, gc = g;
      for (double& x : pc.values()) x += c;
      for (double& x : gc.values()) x += c;
      CHECK(std::fabs(MesaExcessExact(pc, gc).value - v) <= 1e-9);

      DensityMap pp(h + 3, w + 2), gp(h + 3, w + 2);
      for (int r = 0; r < h; ++r)
        for (int col = 0; col < w; ++col) {
          pp(r + 1, col + 1) = p(r, col);
          gp(r + 1, col + 1) = g(r, col);
        }
      CHECK(std::fabs(MesaExcessExact(pp, gp).value - v) <= 1e-9);

      CHECK(v >= std::fabs(TotalCount(p) - TotalCount(g)) - 1e-12);
    }
  }
}
