#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace llmrerank::csv {

struct Record {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line where the record starts
};

/// RFC 4180-style reader: quoted fields may hold delimiters, doubled quotes
/// and newlines. Blank lines are skipped.
std::vector<Record> read_records(std::string_view content, char delimiter = ',');

std::string escape(std::string_view field, char delimiter = ',');

}  // namespace llmrerank::csv
