#include "wearpm/csv.hpp"

#include <stdexcept>

namespace wearpm::csv {

std::optional<std::vector<std::string>> Reader::next() {
    if (first_) {
        first_ = false;
        if (in_.peek() == 0xEF) {
            char bom[3];
            in_.read(bom, 3);
            if (!(static_cast<unsigned char>(bom[1]) == 0xBB && static_cast<unsigned char>(bom[2]) == 0xBF)) {
                in_.seekg(0);
            }
        }
    }
    if (in_.peek() == std::char_traits<char>::eof()) return std::nullopt;

    record_line_ = line_;
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    bool field_was_quoted = false;
    int c;
    while ((c = in_.get()) != std::char_traits<char>::eof()) {
        char ch = static_cast<char>(c);
        if (quoted) {
            if (ch == '"') {
                if (in_.peek() == '"') {
                    in_.get();
                    field.push_back('"');
                } else {
                    quoted = false;
                }
            } else {
                if (ch == '\n') ++line_;
                field.push_back(ch);
            }
            continue;
        }
        if (ch == '"' && field.empty() && !field_was_quoted) {
            quoted = true;
            field_was_quoted = true;
        } else if (ch == delim_) {
            fields.push_back(std::move(field));
            field.clear();
            field_was_quoted = false;
        } else if (ch == '\r') {
            if (in_.peek() == '\n') in_.get();
            ++line_;
            break;
        } else if (ch == '\n') {
            ++line_;
            break;
        } else {
            field.push_back(ch);
        }
    }
    if (quoted) {
        throw std::runtime_error("unterminated quoted field starting on line " + std::to_string(record_line_));
    }
    fields.push_back(std::move(field));
    return fields;
}

std::string quote(std::string_view field, char delimiter) {
    bool needs = field.find_first_of(std::string{'"', '\n', '\r', delimiter}) != std::string_view::npos ||
                 (!field.empty() && (field.front() == ' ' || field.back() == ' '));
    if (!needs) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields, char delimiter) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.put(delimiter);
        out << quote(fields[i], delimiter);
    }
    out.put('\n');
}

}  // namespace wearpm::csv
