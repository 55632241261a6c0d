/*
 * Copyright 2026 The gazevit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gazevit::csv {

/// Splits one CSV record. Double-quoted fields may contain commas and "".
std::vector<std::string> split(std::string_view line);
/// Quotes a field only if it contains a comma, quote or newline.
std::string escape(std::string_view field);
std::string trim(std::string_view s);

std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);
/// Accepts 1/0, true/false, yes/no (case-insensitive).
std::optional<bool> parse_bool(std::string_view s);

/// Shortest decimal form that round-trips a double.
std::string format_double(double v);

}  // namespace gazevit::csv
