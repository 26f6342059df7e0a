#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace wearpm::csv {

// RFC 4180 reader: quoted fields may contain delimiters, doubled quotes and
// line breaks. A leading UTF-8 BOM is dropped.
class Reader {
public:
    explicit Reader(std::istream& in, char delimiter = ',') : in_(in), delim_(delimiter) {}

    // Next record, or nullopt at end of input. Throws std::runtime_error on an
    // unterminated quoted field.
    std::optional<std::vector<std::string>> next();

    // 1-based line where the last returned record started.
    std::size_t line() const { return record_line_; }

private:
    std::istream& in_;
    char delim_;
    std::size_t line_ = 1;
    std::size_t record_line_ = 0;
    bool first_ = true;
};

std::string quote(std::string_view field, char delimiter = ',');
void write_row(std::ostream& out, const std::vector<std::string>& fields, char delimiter = ',');

}  // namespace wearpm::csv
