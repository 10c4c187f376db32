// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "cds/errors.hpp"
#include "cds/image.hpp"

namespace cds {
namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Netpbm header: magic then whitespace-separated integers, '#' comments.
struct NetpbmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t data_offset = 0;
};

NetpbmHeader parse_header(const std::vector<unsigned char>& buf, const std::filesystem::path& path) {
  NetpbmHeader h;
  std::size_t pos = 0;
  auto fail = [&](const std::string& why) { return DataError("malformed netpbm header in " + path.string() + ": " + why); };
  auto skip_space = [&] {
    while (pos < buf.size()) {
      if (buf[pos] == '#') {
        while (pos < buf.size() && buf[pos] != '\n') ++pos;
      } else if (std::isspace(buf[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&](const char* what) {
    skip_space();
    if (pos >= buf.size() || !std::isdigit(buf[pos])) throw fail(std::string("expected ") + what);
    long v = 0;
    while (pos < buf.size() && std::isdigit(buf[pos])) {
      v = v * 10 + (buf[pos] - '0');
      if (v > 1'000'000) throw fail(std::string(what) + " out of range");
      ++pos;
    }
    return static_cast<int>(v);
  };
  if (buf.size() < 2) throw fail("file too short");
  h.magic.assign(buf.begin(), buf.begin() + 2);
  pos = 2;
  h.width = read_int("width");
  h.height = read_int("height");
  h.maxval = read_int("maxval");
  if (pos >= buf.size() || !std::isspace(buf[pos])) throw fail("missing whitespace after maxval");
  h.data_offset = pos + 1;
  if (h.width < 1 || h.height < 1) throw fail("empty raster");
  if (h.maxval < 1 || h.maxval > 65535) throw fail("maxval out of range");
  return h;
}

void write_file(const std::filesystem::path& path, const std::string& header, const std::vector<unsigned char>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

// Minimal CSV field splitter with double-quote support.
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && (s[b] == ' ' || s[b] == '\t')) ++b;
  return s.substr(b);
}

}  // namespace

ImageRGB load_image(const std::filesystem::path& path) {
  const std::vector<unsigned char> buf = read_file(path);
  const NetpbmHeader h = parse_header(buf, path);
  if (h.magic != "P6") throw DataError(path.string() + ": not a binary PPM (P6)");
  if (h.maxval > 255) throw DataError(path.string() + ": only 8-bit PPM is supported");
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height * 3;
  if (buf.size() < h.data_offset + n) {
    throw DataError(path.string() + ": truncated payload (" + std::to_string(buf.size() - h.data_offset) + " of " +
                    std::to_string(n) + " bytes)");
  }
  ImageRGB img(h.height, h.width);
  const float maxval = static_cast<float>(h.maxval);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned v = buf[h.data_offset + i];
    if (v > static_cast<unsigned>(h.maxval)) throw DataError(path.string() + ": sample exceeds maxval");
    img.pixels[i] = static_cast<float>(v) / maxval;
  }
  return img;
}

void save_image(const std::filesystem::path& path, const ImageRGB& image) {
  std::vector<unsigned char> body(image.pixels.size());
  for (std::size_t i = 0; i < body.size(); ++i) {
    const float v = std::clamp(image.pixels[i], 0.0f, 1.0f);
    body[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }
  write_file(path, "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n", body);
}

RawLabels read_pgm(const std::filesystem::path& path) {
  const std::vector<unsigned char> buf = read_file(path);
  const NetpbmHeader h = parse_header(buf, path);
  if (h.magic != "P5") throw DataError(path.string() + ": not a binary PGM (P5)");
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
  const std::size_t bytes = h.maxval > 255 ? 2 : 1;
  if (buf.size() < h.data_offset + n * bytes) throw DataError(path.string() + ": truncated payload");
  RawLabels out;
  out.height = h.height;
  out.width = h.width;
  out.ids.resize(n);
  const unsigned char* p = buf.data() + h.data_offset;
  for (std::size_t i = 0; i < n; ++i) {
    out.ids[i] = bytes == 2 ? (static_cast<std::int32_t>(p[2 * i]) << 8) | p[2 * i + 1] : p[i];
  }
  return out;
}

void write_pgm16(const std::filesystem::path& path, int height, int width, std::span<const std::int32_t> ids) {
  if (ids.size() != static_cast<std::size_t>(height) * width) throw DataError("write_pgm16: size mismatch");
  std::vector<unsigned char> body(ids.size() * 2);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] > 65535) throw DataError("write_pgm16: label " + std::to_string(ids[i]) + " out of range");
    body[2 * i] = static_cast<unsigned char>(ids[i] >> 8);
    body[2 * i + 1] = static_cast<unsigned char>(ids[i] & 0xff);
  }
  write_file(path, "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n65535\n", body);
}

int compact_labels(std::vector<std::int32_t>& ids) {
  std::map<std::int32_t, std::int32_t> remap;
  for (std::int32_t v : ids) remap.emplace(v, 0);
  std::int32_t next = 0;
  for (auto& [k, v] : remap) v = next++;
  for (std::int32_t& v : ids) v = remap[v];
  return next;
}

LabelMap make_label_map(int height, int width, std::vector<std::int32_t> ids) {
  if (ids.size() != static_cast<std::size_t>(height) * width) throw DataError("make_label_map: size mismatch");
  LabelMap m;
  m.height = height;
  m.width = width;
  m.n_regions = compact_labels(ids);
  m.labels = std::move(ids);
  return m;
}

LabelMap load_label_map(const std::filesystem::path& path) {
  RawLabels raw = read_pgm(path);
  return make_label_map(raw.height, raw.width, std::move(raw.ids));
}

void save_label_map(const std::filesystem::path& path, const LabelMap& labels) {
  write_pgm16(path, labels.height, labels.width, labels.labels);
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty manifest " + path.string());
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);  // BOM
  const auto header = split_csv(trim(line));
  if (header.size() != 2 || trim(header[0]) != "image" || trim(header[1]) != "label") {
    throw DataError(path.string() + ": manifest header must be `image,label`");
  }
  const std::filesystem::path base = path.parent_path();
  std::vector<ManifestEntry> entries;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 2) throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 2 fields");
    ManifestEntry e{trim(f[0]), trim(f[1])};
    if (e.image.is_relative()) e.image = base / e.image;
    if (e.label.is_relative()) e.label = base / e.label;
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << "image,label\n";
  for (const auto& e : entries) out << e.image.generic_string() << ',' << e.label.generic_string() << '\n';
}

}  // namespace cds
