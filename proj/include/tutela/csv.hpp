#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace tutela::csv {

// Minimal RFC 4180 field handling: commas, double-quoted fields, "" escapes.
// Records never span lines in this project's formats.
std::vector<std::string> split_line(std::string_view line);

// Quotes a field only when it contains a comma, quote or newline.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  // Next non-empty line split into fields, or nullopt at end of stream.
  std::optional<std::vector<std::string>> next();
  // 1-based line number of the record last returned.
  std::size_t line_number() const { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

// Reads the header row and throws DataError unless it equals `expected` exactly.
void expect_header(Reader& reader, const std::vector<std::string>& expected);

}  // namespace tutela::csv
