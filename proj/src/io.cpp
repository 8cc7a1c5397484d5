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

#include "spanet/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "spanet/error.hpp"
#include "spanet/subregion.hpp"

namespace spanet {

namespace {

constexpr int kPgmMaxval = 65535;

std::ifstream OpenForRead(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) ThrowIo("cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream OpenForWrite(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) ThrowIo("cannot open " + path.string() + " for writing");
  return out;
}

std::string FormatReal(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double ParseReal(const std::string& token, const std::filesystem::path& path) {
  std::size_t consumed = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &consumed);
  } catch (const std::exception&) {
    ThrowData("malformed number '" + token + "' in " + path.string());
  }
  while (consumed < token.size() &&
         std::isspace(static_cast<unsigned char>(token[consumed]))) {
    ++consumed;
  }
  if (consumed != token.size()) {
    ThrowData("malformed number '" + token + "' in " + path.string());
  }
  return v;
}

std::vector<std::string> SplitCommas(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

std::string StripCr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

struct PgmData {
  int width = 0;
  int height = 0;
  int maxval = 0;
  double scale = -1.0;  // negative when the file has no scale comment
  std::vector<long> gray;
};

PgmData ReadPgmRaw(const std::filesystem::path& path) {
  std::ifstream in = OpenForRead(path);
  PgmData pgm;
  std::vector<long> header;
  std::string token;
  std::string magic;
  if (!(in >> magic) || magic != "P2") {
    ThrowData(path.string() + " is not a plain (P2) PGM file");
  }
  // Header tokens interleaved with comments; pixel data follows maxval.
  while (header.size() < 3 && in >> token) {
    if (token[0] == '#') {
      std::string rest;
      std::getline(in, rest);
      const std::string comment = token + rest;
      const auto pos = comment.find("scale=");
      if (pos != std::string::npos) {
        pgm.scale = ParseReal(comment.substr(pos + 6), path);
      }
      continue;
    }
    header.push_back(static_cast<long>(ParseReal(token, path)));
  }
  if (header.size() != 3) ThrowData("truncated PGM header in " + path.string());
  pgm.width = static_cast<int>(header[0]);
  pgm.height = static_cast<int>(header[1]);
  pgm.maxval = static_cast<int>(header[2]);
  if (pgm.width < 1 || pgm.height < 1 || pgm.maxval < 1) {
    ThrowData("invalid PGM header in " + path.string());
  }
  pgm.gray.reserve(static_cast<std::size_t>(pgm.width) * pgm.height);
  long g = 0;
  while (pgm.gray.size() < static_cast<std::size_t>(pgm.width) * pgm.height &&
         in >> g) {
    if (g < 0 || g > pgm.maxval) ThrowData("PGM gray out of range in " + path.string());
    pgm.gray.push_back(g);
  }
  if (pgm.gray.size() != static_cast<std::size_t>(pgm.width) * pgm.height) {
    ThrowData("truncated PGM pixel data in " + path.string());
  }
  return pgm;
}

void WritePgmRaw(const std::filesystem::path& path, int height, int width,
                 int maxval, const std::string& comment,
                 const std::vector<long>& gray) {
  std::ofstream out = OpenForWrite(path);
  out << "P2\n";
  if (!comment.empty()) out << "# " << comment << "\n";
  out << width << " " << height << "\n" << maxval << "\n";
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      if (c) out << ' ';
      out << gray[static_cast<std::size_t>(r) * width + c];
    }
    out << '\n';
  }
  if (!out) ThrowIo("failed writing " + path.string());
}

}  // namespace

PointAnnotationSet ReadAnnotationsCsv(const std::filesystem::path& path,
                                      int image_height, int image_width) {
  std::ifstream in = OpenForRead(path);
  std::string line;
  if (!std::getline(in, line) || StripCr(line) != "row,col") {
    ThrowData("annotation file " + path.string() + " must start with header 'row,col'");
  }
  PointAnnotationSet annotations(image_height, image_width);
  while (std::getline(in, line)) {
    line = StripCr(line);
    if (line.empty()) continue;
    const auto fields = SplitCommas(line);
    if (fields.size() != 2) ThrowData("malformed annotation line '" + line + "'");
    annotations.Add({ParseReal(fields[0], path), ParseReal(fields[1], path)});
  }
  return annotations;
}

void WriteAnnotationsCsv(const std::filesystem::path& path,
                         const PointAnnotationSet& annotations) {
  std::ofstream out = OpenForWrite(path);
  out << "row,col\n";
  for (const Point& p : annotations.points()) {
    out << FormatReal(p.row) << "," << FormatReal(p.col) << "\n";
  }
  if (!out) ThrowIo("failed writing " + path.string());
}

DensityMap ReadDensityCsv(const std::filesystem::path& path) {
  std::ifstream in = OpenForRead(path);
  std::vector<double> values;
  int width = -1;
  int height = 0;
  std::string line;
  while (std::getline(in, line)) {
    line = StripCr(line);
    if (line.empty()) continue;
    const auto fields = SplitCommas(line);
    if (width < 0) width = static_cast<int>(fields.size());
    if (static_cast<int>(fields.size()) != width) {
      ThrowData("ragged density CSV " + path.string());
    }
    for (const auto& f : fields) values.push_back(ParseReal(f, path));
    ++height;
  }
  if (height == 0) ThrowData("empty density CSV " + path.string());
  return DensityMap(height, width, std::move(values));
}

void WriteDensityCsv(const std::filesystem::path& path, const DensityMap& map) {
  std::ofstream out = OpenForWrite(path);
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) {
      if (c) out << ',';
      out << FormatReal(map(r, c));
    }
    out << '\n';
  }
  if (!out) ThrowIo("failed writing " + path.string());
}

DensityMap ReadDensityPgm(const std::filesystem::path& path) {
  const PgmData pgm = ReadPgmRaw(path);
  const double scale = pgm.scale < 0.0 ? 1.0 : pgm.scale;
  std::vector<double> values(pgm.gray.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = scale * static_cast<double>(pgm.gray[i]) / pgm.maxval;
  }
  return DensityMap(pgm.height, pgm.width, std::move(values));
}

void WriteDensityPgm(const std::filesystem::path& path, const DensityMap& map) {
  double scale = 0.0;
  for (double v : map.values()) scale = std::max(scale, v);
  std::vector<long> gray(map.size(), 0);
  if (scale > 0.0) {
    const auto values = map.values();
    for (std::size_t i = 0; i < gray.size(); ++i) {
      const double g = std::round(std::max(0.0, values[i]) / scale * kPgmMaxval);
      gray[i] = std::clamp(static_cast<long>(g), 0L, static_cast<long>(kPgmMaxval));
    }
  }
  WritePgmRaw(path, map.height(), map.width(), kPgmMaxval,
              "scale=" + FormatReal(scale), gray);
}

DensityMap ReadPgm(const std::filesystem::path& path) {
  return ReadDensityPgm(path);
}

void WriteMaskPgm(const std::filesystem::path& path, const DiscrepancyMask& mask) {
  std::vector<long> gray(mask.values().size());
  for (std::size_t i = 0; i < gray.size(); ++i) {
    gray[i] = mask.values()[i] >= 0.5 ? 255 : 0;
  }
  WritePgmRaw(path, mask.height(), mask.width(), 255, "", gray);
}

void WriteMaskCsv(const std::filesystem::path& path, const DiscrepancyMask& mask) {
  std::ofstream out = OpenForWrite(path);
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (c) out << ',';
      out << FormatReal(mask(r, c));
    }
    out << '\n';
  }
  if (!out) ThrowIo("failed writing " + path.string());
}

}  // namespace spanet
