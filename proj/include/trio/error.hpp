#pragma once

#include <stdexcept>
#include <string>

namespace trio {

// Exit-code contract: 0 success, 1 usage, 2 data error, 3 training/eval error.
enum class ErrorKind { usage = 1, data = 2, train = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string msg)
        : std::runtime_error(std::move(msg)), kind_(kind) {}

    ErrorKind kind() const { return kind_; }
    int exit_code() const { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail_usage(const std::string& msg) { throw Error(ErrorKind::usage, msg); }
[[noreturn]] inline void fail_data(const std::string& msg) { throw Error(ErrorKind::data, msg); }
[[noreturn]] inline void fail_train(const std::string& msg) { throw Error(ErrorKind::train, msg); }

} // namespace trio
