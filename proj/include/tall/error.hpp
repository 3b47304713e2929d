#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tall {

/// Broad error classes. The CLI maps each kind onto a process exit code.
enum class ErrorKind { usage, config, shape, format, io, numerical };

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::usage: return "usage";
        case ErrorKind::config: return "config";
        case ErrorKind::shape: return "shape";
        case ErrorKind::format: return "format";
        case ErrorKind::io: return "io";
        case ErrorKind::numerical: return "numerical";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct UsageError : Error {
    explicit UsageError(const std::string& m) : Error(ErrorKind::usage, m) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error(ErrorKind::config, m) {}
};

struct IoError : Error {
    explicit IoError(const std::string& m) : Error(ErrorKind::io, m) {}
};

struct NumericalError : Error {
    explicit NumericalError(const std::string& m) : Error(ErrorKind::numerical, m) {}
};

inline std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

/// Shape mismatch raised by a tensor op; carries the op name and both shapes.
class ShapeError : public Error {
public:
    ShapeError(std::string op, std::vector<std::size_t> lhs, std::vector<std::size_t> rhs)
        : Error(ErrorKind::shape,
                op + ": shape mismatch " + shape_str(lhs) + " vs " + shape_str(rhs)),
          op_(std::move(op)), lhs_(std::move(lhs)), rhs_(std::move(rhs)) {}

    const std::string& op() const noexcept { return op_; }
    const std::vector<std::size_t>& lhs() const noexcept { return lhs_; }
    const std::vector<std::size_t>& rhs() const noexcept { return rhs_; }

private:
    std::string op_;
    std::vector<std::size_t> lhs_, rhs_;
};

/// Malformed binary input; offset is the byte position where decoding failed.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : Error(ErrorKind::format, what + " at byte offset " + std::to_string(offset)),
          offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

}  // namespace tall
