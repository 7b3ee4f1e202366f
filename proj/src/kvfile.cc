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

#include "trackopt/kvfile.h"

#include <charconv>
#include <fstream>
#include <sstream>

namespace trackopt {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& token) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError("key '" + key + "': not a number: '" + token + "'");
  }
  return value;
}

}  // namespace

std::string format_double(double value) {
  char buffer[64];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  (void)ec;
  return std::string(buffer, ptr);
}

KeyValueFile KeyValueFile::parse(const std::string& text) {
  KeyValueFile kv;
  std::istringstream in(text);
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string content = trim(line);
    if (content.empty() || content[0] == '#') continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_number) +
                        ": expected 'key = value'");
    }
    const std::string key = trim(content.substr(0, eq));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(line_number) + ": empty key");
    }
    if (kv.has(key)) {
      throw ConfigError("line " + std::to_string(line_number) +
                        ": duplicate key '" + key + "'");
    }
    kv.set(key, trim(content.substr(eq + 1)));
  }
  return kv;
}

KeyValueFile KeyValueFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

bool KeyValueFile::has(const std::string& key) const {
  return values_.count(key) != 0;
}

const std::string& KeyValueFile::raw(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing key '" + key + "'");
  return it->second;
}

double KeyValueFile::number(const std::string& key) const {
  return parse_double(key, raw(key));
}

double KeyValueFile::number_or(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

long long KeyValueFile::integer(const std::string& key) const {
  const std::string& token = raw(key);
  long long value = 0;
  auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ConfigError("key '" + key + "': not an integer: '" + token + "'");
  }
  return value;
}

long long KeyValueFile::integer_or(const std::string& key,
                                   long long fallback) const {
  return has(key) ? integer(key) : fallback;
}

std::vector<double> KeyValueFile::numbers(const std::string& key) const {
  std::istringstream in(raw(key));
  std::vector<double> out;
  std::string token;
  while (in >> token) out.push_back(parse_double(key, token));
  return out;
}

void KeyValueFile::set(const std::string& key, const std::string& value) {
  if (!has(key)) order_.push_back(key);
  values_[key] = value;
}

void KeyValueFile::set(const std::string& key, double value) {
  set(key, format_double(value));
}

void KeyValueFile::set(const std::string& key,
                       const std::vector<double>& values) {
  std::string joined;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) joined += ' ';
    joined += format_double(values[i]);
  }
  set(key, joined);
}

std::string KeyValueFile::to_string() const {
  std::string out;
  for (const auto& key : order_) out += key + " = " + values_.at(key) + "\n";
  return out;
}

void KeyValueFile::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << to_string();
}

}  // namespace trackopt
