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

#ifndef TRACKOPT_KVFILE_H_
#define TRACKOPT_KVFILE_H_

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace trackopt {

// Thrown for malformed or inconsistent configuration input.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// "key = value" text. Blank lines and lines starting with '#' are ignored.
// Values may hold several whitespace-separated numbers.
class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text);
  static KeyValueFile load(const std::string& path);

  bool has(const std::string& key) const;
  const std::string& raw(const std::string& key) const;
  double number(const std::string& key) const;
  double number_or(const std::string& key, double fallback) const;
  long long integer(const std::string& key) const;
  long long integer_or(const std::string& key, long long fallback) const;
  std::vector<double> numbers(const std::string& key) const;

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, const std::vector<double>& values);

  // Keys are emitted in insertion order.
  std::string to_string() const;
  void save(const std::string& path) const;

  const std::vector<std::string>& keys() const { return order_; }

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
};

// Shortest text that parses back to the same double.
std::string format_double(double value);

}  // namespace trackopt

#endif  // TRACKOPT_KVFILE_H_
