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

#include <filesystem>

#include "spanet/density_map.hpp"

namespace spanet {

class DiscrepancyMask;

// Annotation CSV: header "row,col", then one "row,col" pair per line.
PointAnnotationSet ReadAnnotationsCsv(const std::filesystem::path& path,
                                      int image_height, int image_width);
void WriteAnnotationsCsv(const std::filesystem::path& path,
                         const PointAnnotationSet& annotations);

// Exact dump: one map row per line, comma separated, 17 significant digits.
DensityMap ReadDensityCsv(const std::filesystem::path& path);
void WriteDensityCsv(const std::filesystem::path& path, const DensityMap& map);

// Plain PGM (P2), maxval 65535, with a "# scale=<real>" comment mapping gray
// 65535 back to the real value <real>. Negative densities clamp to gray 0.
DensityMap ReadDensityPgm(const std::filesystem::path& path);
void WriteDensityPgm(const std::filesystem::path& path, const DensityMap& map);

// Generic grayscale reader used for scene images (any maxval, P2 only).
// Values are returned as gray/maxval scaled by the file's scale comment when
// present.
DensityMap ReadPgm(const std::filesystem::path& path);

// Masks: hard PGM (0/255 at the 0.5 cut) and soft CSV.
void WriteMaskPgm(const std::filesystem::path& path, const DiscrepancyMask& mask);
void WriteMaskCsv(const std::filesystem::path& path, const DiscrepancyMask& mask);

}  // namespace spanet
