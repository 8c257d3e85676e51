#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace cellpp::csv {

/// RFC 4180-style reader: quoted fields, doubled quotes, CRLF tolerated.
class Reader {
 public:
  explicit Reader(std::istream& in);

  const std::vector<std::string>& header() const { return header_; }
  /// Column index of a header name; nullopt when absent.
  std::optional<std::size_t> column(std::string_view name) const;
  /// Next record, or false at end of input. `line` is 1-based, header = 1.
  bool next(std::vector<std::string>& fields);
  std::size_t line() const { return line_; }

 private:
  bool read_record(std::vector<std::string>& fields);
  std::istream& in_;
  std::vector<std::string> header_;
  std::size_t line_ = 0;
};

std::string quote(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace cellpp::csv
