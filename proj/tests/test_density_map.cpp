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
#include "spanet/density_map.hpp"
#include "spanet/error.hpp"
#include "test_util.hpp"

using namespace spanet;

namespace {

// Reference: every pixel of the map visited for every head.
DensityMap OracleRender(const std::vector<Point>& pts, int h, int w, double sigma) {
  DensityMap out(h, w);
  for (const Point& p : pts) {
    std::vector<double> k(static_cast<std::size_t>(h) * w, 0.0);
    double mass = 0.0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double d2 = (y - p.row) * (y - p.row) + (x - p.col) * (x - p.col);
        if (std::sqrt(d2) <= 4.0 * sigma) {
          k[static_cast<std::size_t>(y) * w + x] = std::exp(-d2 / (2.0 * sigma * sigma));
          mass += k[static_cast<std::size_t>(y) * w + x];
        }
      }
    }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out(y, x) += k[static_cast<std::size_t>(y) * w + x] / mass;
  }
  return out;
}

}  // namespace

TEST_SUITE("density_map") {
  TEST_CASE("empty annotation set renders an all-zero map") {
    PointAnnotationSet ann(16, 16);
    const DensityMap m = RenderGroundTruth(ann, 2.0, 1);
    CHECK(m.height() == 16);
    CHECK(m.width() == 16);
    CHECK(TotalCount(m) == 0.0);
    for (double v : m.values()) CHECK(v == 0.0);
  }

  TEST_CASE("single centered head sums to one and peaks at the center") {
    PointAnnotationSet ann(33, 33, {{16.0, 16.0}});
    const DensityMap m = RenderGroundTruth(ann, 2.0, 1);
    CHECK(std::fabs(TotalCount(m) - 1.0) <= 1e-6);
    int br = 0, bc = 0;
    for (int r = 0; r < 33; ++r)
      for (int c = 0; c < 33; ++c)
        if (m(r, c) > m(br, bc)) br = r, bc = c;
    CHECK(br == 16);
    CHECK(bc == 16);
  }

  TEST_CASE("three heads match the direct double-loop oracle") {
    const std::vector<Point> pts{{3.2, 4.7}, {12.0, 12.5}, {20.9, 1.1}};
    PointAnnotationSet ann(24, 24, pts);
    const DensityMap m = RenderGroundTruth(ann, 1.5, 1);
    const DensityMap ref = OracleRender(pts, 24, 24, 1.5);
    CHECK(std::fabs(TotalCount(m) - 3.0) <= 1e-6);
    for (std::size_t i = 0; i < m.size(); ++i) CHECK(m.values()[i] == doctest::Approx(ref.values()[i]).epsilon(1e-12));
  }

  TEST_CASE("points outside the image are rejected") {
    PointAnnotationSet ann(8, 8);
    CHECK_THROWS_AS(ann.Add({8.0, 1.0}), Error);
    CHECK_THROWS_AS(ann.Add({1.0, -0.5}), Error);
    try {
      ann.Add({-1.0, 0.0});
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kData);
    }
    CHECK_THROWS_AS(PointAnnotationSet(4, 4, {{0.0, 4.0}}), Error);
    CHECK(ann.count() == 0);
  }

  TEST_CASE("invalid maps are rejected") {
    CHECK_THROWS_AS(DensityMap(0, 3), Error);
    CHECK_THROWS_AS(DensityMap(2, 2, std::vector<double>{1.0, 2.0, 3.0}), Error);
    CHECK_THROWS_AS(DensityMap(1, 2, std::vector<double>{1.0, NAN}), Error);
    CHECK_THROWS_AS(RenderGroundTruth(PointAnnotationSet(4, 4), 0.0, 1), Error);
  }

  TEST_CASE("total count") {
    CHECK(TotalCount(DensityMap(4, 4)) == 0.0);
    DensityMap one(3, 3);
    one(1, 2) = 2.5;
    CHECK(TotalCount(one) == 2.5);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 30.0);
    PointAnnotationSet ann(30, 30);
    for (int i = 0; i < 7; ++i) ann.Add({u(rng), u(rng)});
    CHECK(std::fabs(TotalCount(RenderGroundTruth(ann, 2.0, 1)) - 7.0) <= 1e-6);
  }

  TEST_CASE("stride divides points and rounds the map size up") {
    PointAnnotationSet ann(30, 17, {{5.0, 5.0}, {29.0, 16.0}, {14.2, 8.8}});
    const DensityMap m = RenderGroundTruth(ann, 1.0, 4);
    CHECK(m.height() == 8);
    CHECK(m.width() == 5);
    CHECK(std::fabs(TotalCount(m) - 3.0) <= 1e-6);
    // A head at (8, 8) full-res sits on pixel (2, 2) at stride 4.
    const DensityMap single = RenderGroundTruth(PointAnnotationSet(16, 16, {{8.0, 8.0}}), 0.5, 4);
    int br = 0, bc = 0;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c)
        if (single(r, c) > single(br, bc)) br = r, bc = c;
    CHECK(br == 2);
    CHECK(bc == 2);
  }

  TEST_CASE("bilinear resize") {
    std::mt19937_64 rng(3);
    const DensityMap m = testutil::RandomMap(rng, 7, 5);
    CHECK(ResizeBilinear(m, 7, 5) == m);

    const DensityMap c(4, 6, 0.75);
    for (auto [h, w] : {std::pair{1, 1}, {9, 13}, {3, 2}}) {
      const DensityMap r = ResizeBilinear(c, h, w);
      for (double v : r.values()) CHECK(v == doctest::Approx(0.75).epsilon(1e-15));
    }

    const DensityMap two(2, 2, std::vector<double>{0.0, 1.0, 1.0, 0.0});
    const DensityMap three = ResizeBilinear(two, 3, 3);
    CHECK(three(1, 1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(three(0, 0) == 0.0);
    CHECK(three(0, 2) == 1.0);
    CHECK(three(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_THROWS_AS(ResizeBilinear(two, 0, 3), Error);
  }

  TEST_CASE("property: count conservation over random annotation sets") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> npts(0, 50);
    std::uniform_real_distribution<double> sig(0.8, 4.0);
    std::uniform_int_distribution<int> dim(8, 48);
    for (int trial = 0; trial < 100; ++trial) {
      const int h = dim(rng), w = dim(rng);
      std::uniform_real_distribution<double> ry(0.0, h), rx(0.0, w);
      PointAnnotationSet ann(h, w);
      const int n = npts(rng);
      for (int i = 0; i < n; ++i) {
        double y = ry(rng), x = rx(rng);
        if (y >= h) y = h - 1e-9;
        if (x >= w) x = w - 1e-9;
        ann.Add({y, x});
      }
      const double total = TotalCount(RenderGroundTruth(ann, sig(rng), 1));
      CHECK(std::fabs(total - n) <= 1e-6 * std::max(1, n));
    }
  }

  TEST_CASE("property: translation covariance and superposition") {
    std::mt19937_64 rng(5);
    const double sigma = 1.25;
    std::uniform_real_distribution<double> inner(8.0, 20.0);
    std::vector<Point> a, b;
    for (int i = 0; i < 6; ++i) a.push_back({inner(rng), inner(rng)});
    for (int i = 0; i < 4; ++i) b.push_back({inner(rng), inner(rng)});

    const int dy = 3, dx = 5;
    std::vector<Point> shifted;
    for (const Point& p : a) shifted.push_back({p.row + dy, p.col + dx});
    const DensityMap base = RenderGroundTruth(PointAnnotationSet(40, 40, a), sigma, 1);
    const DensityMap moved = RenderGroundTruth(PointAnnotationSet(40, 40, shifted), sigma, 1);
    for (int r = 0; r < 40; ++r) {
      for (int c = 0; c < 40; ++c) {
        const double expected = (r - dy >= 0 && c - dx >= 0) ? base(r - dy, c - dx) : 0.0;
        CHECK(std::fabs(moved(r, c) - expected) <= 1e-9);
      }
    }

    std::vector<Point> both = a;
    both.insert(both.end(), b.begin(), b.end());
    const DensityMap sum = RenderGroundTruth(PointAnnotationSet(40, 40, both), sigma, 1);
    const DensityMap parts = base + RenderGroundTruth(PointAnnotationSet(40, 40, b), sigma, 1);
    for (std::size_t i = 0; i < sum.size(); ++i) CHECK(std::fabs(sum.values()[i] - parts.values()[i]) <= 1e-9);
  }
}
