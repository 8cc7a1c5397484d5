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

#pragma once

#include <span>

#include "spanet/density_map.hpp"

namespace spanet {

/// Axis-aligned rectangle with inclusive pixel bounds.
struct RectRegion {
  int top = 0;
  int left = 0;
  int bottom = 0;
  int right = 0;

  int height() const { return bottom - top + 1; }
  int width() const { return right - left + 1; }
  long area() const { return static_cast<long>(height()) * width(); }
  bool Contains(int row, int col) const {
    return row >= top && row <= bottom && col >= left && col <= right;
  }

  friend bool operator==(const RectRegion&, const RectRegion&) = default;
};

struct MesaResult {
  double value = 0.0;
  RectRegion region;
};

// Maximum excess over all non-empty rectangles,
//   max_B |sum_B pred - sum_B gt|,
// computed with column-compressed Kadane in O(H^2 W). Ties resolve to the
// smallest area, then lexicographic (top, left, bottom, right).
//
// `workers` > 1 splits the top-row loop across threads; the result is
// identical to the sequential run because the reduction order is total.
MesaResult MesaExcessExact(const DensityMap& pred, const DensityMap& gt,
                           int workers = 1);

// Exhaustive enumeration over a 2D prefix-sum table, O(H^2 W^2). Same tie
// rule as the exact routine. Intended for grids up to 32x32.
MesaResult MesaExcessBruteforceWithRegion(const DensityMap& pred,
                                          const DensityMap& gt);
double MesaExcessBruteforce(const DensityMap& pred, const DensityMap& gt);

// Mean of MesaExcessExact over a batch.
double MesaLossBatch(std::span<const DensityMap> preds,
                     std::span<const DensityMap> gts);

}  // namespace spanet
