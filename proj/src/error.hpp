#pragma once

#include <stdexcept>
#include <string>

namespace pcomp {

enum class ErrKind {
    validation,
    io,
};

class Error : public std::runtime_error {
public:
    Error(ErrKind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}
    ErrKind kind() const { return kind_; }

private:
    ErrKind kind_;
};

[[noreturn]] inline void fail_validation(const std::string& msg) {
    throw Error(ErrKind::validation, msg);
}

[[noreturn]] inline void fail_io(const std::string& msg) {
    throw Error(ErrKind::io, msg);
}

} // namespace pcomp
