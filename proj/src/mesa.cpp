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

#include "spanet/mesa.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "spanet/error.hpp"

namespace spanet {

namespace {

using Real = long double;

struct Candidate {
  Real value = -1.0L;
  RectRegion region;
};

// Total order: larger value, then smaller area, then lexicographic bounds.
bool Better(const Candidate& a, const Candidate& b) {
  if (a.value != b.value) return a.value > b.value;
  if (a.region.area() != b.region.area()) return a.region.area() < b.region.area();
  const RectRegion& x = a.region;
  const RectRegion& y = b.region;
  if (x.top != y.top) return x.top < y.top;
  if (x.left != y.left) return x.left < y.left;
  if (x.bottom != y.bottom) return x.bottom < y.bottom;
  return x.right < y.right;
}

std::vector<Real> Difference(const DensityMap& pred, const DensityMap& gt) {
  std::vector<Real> diff(pred.size());
  const auto p = pred.values();
  const auto g = gt.values();
  for (std::size_t i = 0; i < diff.size(); ++i) {
    diff[i] = static_cast<Real>(p[i]) - static_cast<Real>(g[i]);
  }
  return diff;
}

// Kadane over compressed columns for one row band; restarting on cur <= 0
// keeps the shortest subarray for each end column.
void ScanBand(const std::vector<Real>& columns, int top, int bottom,
              Real sign, Candidate& best) {
  Real cur = 0.0L;
  int start = 0;
  for (int j = 0; j < static_cast<int>(columns.size()); ++j) {
    const Real v = sign * columns[j];
    if (cur <= 0.0L) {
      cur = v;
      start = j;
    } else {
      cur += v;
    }
    Candidate cand{cur, RectRegion{top, start, bottom, j}};
    if (Better(cand, best)) best = cand;
  }
}

Candidate ScanTops(const std::vector<Real>& diff, int height, int width,
                   int first_top, int step) {
  Candidate best;
  std::vector<Real> columns(width);
  std::vector<Real> compensation(width);
  for (int top = first_top; top < height; top += step) {
    std::fill(columns.begin(), columns.end(), 0.0L);
    std::fill(compensation.begin(), compensation.end(), 0.0L);
    for (int bottom = top; bottom < height; ++bottom) {
      const Real* row = diff.data() + static_cast<std::size_t>(bottom) * width;
      for (int c = 0; c < width; ++c) {
        // Kahan-compensated column accumulation.
        const Real y = row[c] - compensation[c];
        const Real t = columns[c] + y;
        compensation[c] = (t - columns[c]) - y;
        columns[c] = t;
      }
      ScanBand(columns, top, bottom, 1.0L, best);
      ScanBand(columns, top, bottom, -1.0L, best);
    }
  }
  return best;
}

}  // namespace

MesaResult MesaExcessExact(const DensityMap& pred, const DensityMap& gt,
                           int workers) {
  RequireSameShape(pred, gt, "MESA");
  const int height = pred.height();
  const int width = pred.width();
  const std::vector<Real> diff = Difference(pred, gt);

  workers = std::max(1, std::min(workers, height));
  Candidate best;
  if (workers == 1) {
    best = ScanTops(diff, height, width, 0, 1);
  } else {
    std::vector<Candidate> partial(workers);
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        partial[w] = ScanTops(diff, height, width, w, workers);
      });
    }
    for (auto& t : threads) t.join();
    for (const Candidate& c : partial) {
      if (Better(c, best)) best = c;
    }
  }
  return {static_cast<double>(best.value), best.region};
}

MesaResult MesaExcessBruteforceWithRegion(const DensityMap& pred,
                                          const DensityMap& gt) {
  RequireSameShape(pred, gt, "MESA brute force");
  const int height = pred.height();
  const int width = pred.width();
  const std::vector<Real> diff = Difference(pred, gt);

  // prefix[(r)*(W+1)+c] = sum of diff over rows < r, cols < c.
  const int stride = width + 1;
  std::vector<Real> prefix(static_cast<std::size_t>(height + 1) * stride, 0.0L);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      prefix[(r + 1) * stride + c + 1] = diff[static_cast<std::size_t>(r) * width + c] +
                                         prefix[r * stride + c + 1] +
                                         prefix[(r + 1) * stride + c] -
                                         prefix[r * stride + c];
    }
  }

  Candidate best;
  for (int top = 0; top < height; ++top) {
    for (int left = 0; left < width; ++left) {
      for (int bottom = top; bottom < height; ++bottom) {
        for (int right = left; right < width; ++right) {
          const Real sum = prefix[(bottom + 1) * stride + right + 1] -
                           prefix[top * stride + right + 1] -
                           prefix[(bottom + 1) * stride + left] +
                           prefix[top * stride + left];
          Candidate cand{std::fabs(sum), RectRegion{top, left, bottom, right}};
          if (Better(cand, best)) best = cand;
        }
      }
    }
  }
  return {static_cast<double>(best.value), best.region};
}

double MesaExcessBruteforce(const DensityMap& pred, const DensityMap& gt) {
  return MesaExcessBruteforceWithRegion(pred, gt).value;
}

double MesaLossBatch(std::span<const DensityMap> preds,
                     std::span<const DensityMap> gts) {
  if (preds.empty()) ThrowData("MESA batch is empty");
  if (preds.size() != gts.size()) ThrowData("MESA batch size mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    sum += MesaExcessExact(preds[i], gts[i]).value;
  }
  return sum / static_cast<double>(preds.size());
}

}  // namespace spanet
