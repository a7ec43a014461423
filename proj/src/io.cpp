// Copyright 2026 The driftlab Authors.
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

#include "driftlab/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <sstream>

#include "driftlab/common.hpp"

namespace driftlab::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

std::ofstream open_out(const std::filesystem::path& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::out : std::ios::out);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary | std::ios::in : std::ios::in);
  if (!in) throw DataError("cannot open for reading: " + path.string());
  return in;
}

namespace {

template <typename T>
void write_raw(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in, std::string_view what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw DataError("truncated file while reading " + std::string(what));
  }
  return v;
}

}  // namespace

void write_u8(std::ostream& out, std::uint8_t v) { write_raw(out, v); }
void write_u32(std::ostream& out, std::uint32_t v) { write_raw(out, v); }
void write_u64(std::ostream& out, std::uint64_t v) { write_raw(out, v); }
void write_f64(std::ostream& out, double v) { write_raw(out, v); }

void write_f64s(std::ostream& out, std::span<const double> v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size_bytes()));
}

void write_string(std::ostream& out, std::string_view s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint8_t read_u8(std::istream& in, std::string_view what) {
  return read_raw<std::uint8_t>(in, what);
}
std::uint32_t read_u32(std::istream& in, std::string_view what) {
  return read_raw<std::uint32_t>(in, what);
}
std::uint64_t read_u64(std::istream& in, std::string_view what) {
  return read_raw<std::uint64_t>(in, what);
}
double read_f64(std::istream& in, std::string_view what) {
  return read_raw<double>(in, what);
}

void read_f64s(std::istream& in, std::span<double> out, std::string_view what) {
  if (!in.read(reinterpret_cast<char*>(out.data()),
               static_cast<std::streamsize>(out.size_bytes()))) {
    throw DataError("truncated file while reading " + std::string(what));
  }
}

std::string read_string(std::istream& in, std::string_view what) {
  const std::uint32_t n = read_u32(in, what);
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), n)) {
    throw DataError("truncated file while reading " + std::string(what));
  }
  return s;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_double(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("not a number: '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  std::size_t lineno = 0;
  for (std::string_view line : split(text, '\n')) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw DataError("config line " + std::to_string(lineno) +
                      ": expected 'key = value'");
    }
    kv[std::string(trim(line.substr(0, eq)))] = std::string(trim(line.substr(eq + 1)));
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

}  // namespace driftlab::io
