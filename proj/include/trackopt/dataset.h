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

// In-memory dataset of (encoded input, performance vector) records and its
// binary file.
//
// File layout, little-endian:
//   char[8]  magic "TRKDATA\0"
//   u32      version (1)
//   u64      record count
//   u32      input dim
//   u32      output dim
//   records  input dim + output dim float32 values each

#ifndef TRACKOPT_DATASET_H_
#define TRACKOPT_DATASET_H_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace trackopt {

class DatasetFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  int input_dim = 0;
  int output_dim = 0;
  std::vector<float> inputs;   // size() * input_dim
  std::vector<float> outputs;  // size() * output_dim

  std::size_t size() const {
    return input_dim == 0 ? 0 : inputs.size() / input_dim;
  }
  const float* input(std::size_t i) const {
    return inputs.data() + i * input_dim;
  }
  const float* output(std::size_t i) const {
    return outputs.data() + i * output_dim;
  }
};

void write_dataset(const Dataset& data, const std::string& path);
// Throws DatasetFormatError on a bad header or a truncated record; the
// message names the byte offset or the record index.
Dataset read_dataset(const std::string& path);

}  // namespace trackopt

#endif  // TRACKOPT_DATASET_H_
