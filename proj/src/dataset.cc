// Copyright 2026 The trackopt Authors
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

#include "trackopt/dataset.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace trackopt {
namespace {

static_assert(std::endian::native == std::endian::little,
              "file IO assumes a little-endian host");

constexpr char kMagic[8] = {'T', 'R', 'K', 'D', 'A', 'T', 'A', '\0'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 8 + 4 + 8 + 4 + 4;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(const std::vector<char>& buf, std::size_t& offset) {
  T v;
  std::memcpy(&v, buf.data() + offset, sizeof(T));
  offset += sizeof(T);
  return v;
}

}  // namespace

void write_dataset(const Dataset& data, const std::string& path) {
  if (data.inputs.size() != data.size() * data.input_dim ||
      data.outputs.size() != data.size() * data.output_dim) {
    throw std::invalid_argument("dataset arrays do not match its dims");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, data.size());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.input_dim));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.output_dim));
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.write(reinterpret_cast<const char*>(data.input(i)),
              sizeof(float) * data.input_dim);
    out.write(reinterpret_cast<const char*>(data.output(i)),
              sizeof(float) * data.output_dim);
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<char> buf((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  if (buf.size() < kHeaderBytes) {
    throw DatasetFormatError(path + ": header truncated at byte " +
                             std::to_string(buf.size()));
  }
  if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DatasetFormatError(path + ": bad magic at byte 0");
  }
  std::size_t offset = sizeof(kMagic);
  const auto version = take<std::uint32_t>(buf, offset);
  if (version != kVersion) {
    throw DatasetFormatError(path + ": unsupported version " +
                             std::to_string(version) + " at byte 8");
  }
  const auto count = take<std::uint64_t>(buf, offset);
  Dataset data;
  data.input_dim = static_cast<int>(take<std::uint32_t>(buf, offset));
  data.output_dim = static_cast<int>(take<std::uint32_t>(buf, offset));
  if (data.input_dim <= 0 || data.output_dim <= 0) {
    throw DatasetFormatError(path + ": zero dimension in header");
  }
  const std::size_t record =
      sizeof(float) * (data.input_dim + data.output_dim);
  const std::size_t available = (buf.size() - kHeaderBytes) / record;
  if (available < count) {
    throw DatasetFormatError(
        path + ": truncated in record " + std::to_string(available) + " of " +
        std::to_string(count) + " (byte offset " +
        std::to_string(kHeaderBytes + available * record) + ")");
  }
  data.inputs.resize(count * data.input_dim);
  data.outputs.resize(count * data.output_dim);
  for (std::size_t i = 0; i < count; ++i) {
    std::memcpy(data.inputs.data() + i * data.input_dim, buf.data() + offset,
                sizeof(float) * data.input_dim);
    offset += sizeof(float) * data.input_dim;
    std::memcpy(data.outputs.data() + i * data.output_dim, buf.data() + offset,
                sizeof(float) * data.output_dim);
    offset += sizeof(float) * data.output_dim;
  }
  return data;
}

}  // namespace trackopt
