// Copyright 2025-present the gannet project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace gannet {

enum class ErrorCode {
    invalid_argument,
    io_error,
    corrupt_data,
    version_mismatch,
    logic_error,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void throw_invalid_argument(const std::string& msg) {
    throw Error(ErrorCode::invalid_argument, msg);
}
[[noreturn]] inline void throw_io_error(const std::string& msg) {
    throw Error(ErrorCode::io_error, msg);
}
[[noreturn]] inline void throw_corrupt_data(const std::string& msg) {
    throw Error(ErrorCode::corrupt_data, msg);
}

}  // namespace gannet
