#include "wearpm/error.hpp"

namespace wearpm {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Config: return "ConfigError";
        case ErrorKind::UnsortedInput: return "UnsortedInput";
        case ErrorKind::MalformedXml: return "MalformedXml";
        case ErrorKind::MalformedRecord: return "MalformedRecord";
        case ErrorKind::MissingColumn: return "MissingColumn";
        case ErrorKind::MalformedRow: return "MalformedRow";
        case ErrorKind::MalformedIcs: return "MalformedIcs";
        case ErrorKind::UnknownAttribute: return "UnknownAttribute";
        case ErrorKind::SinkWrite: return "SinkWrite";
        case ErrorKind::Io: return "IoError";
    }
    return "Error";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace wearpm
