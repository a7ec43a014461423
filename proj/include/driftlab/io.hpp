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

// Small helpers shared by the file formats: little-endian binary fields,
// shortest round-trip float text, and "key = value" config files.

#ifndef DRIFTLAB_IO_HPP
#define DRIFTLAB_IO_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace driftlab::io {

std::ofstream open_out(const std::filesystem::path& path, bool binary = false);
std::ifstream open_in(const std::filesystem::path& path, bool binary = false);

void write_u8(std::ostream& out, std::uint8_t v);
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f64(std::ostream& out, double v);
void write_f64s(std::ostream& out, std::span<const double> v);
void write_string(std::ostream& out, std::string_view s);

// Readers throw DataError naming `what` on short reads.
std::uint8_t read_u8(std::istream& in, std::string_view what);
std::uint32_t read_u32(std::istream& in, std::string_view what);
std::uint64_t read_u64(std::istream& in, std::string_view what);
double read_f64(std::istream& in, std::string_view what);
void read_f64s(std::istream& in, std::span<double> out, std::string_view what);
std::string read_string(std::istream& in, std::string_view what);

// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view s);

// Splits on a single delimiter character, keeping empty fields.
std::vector<std::string_view> split(std::string_view s, char delim);

std::string_view trim(std::string_view s);

// "key = value" lines; '#' starts a comment; later keys override earlier ones.
using KeyValues = std::map<std::string, std::string>;
KeyValues read_key_values(const std::filesystem::path& path);
KeyValues parse_key_values(std::string_view text);
std::string format_key_values(const KeyValues& kv);

}  // namespace driftlab::io

#endif  // DRIFTLAB_IO_HPP
