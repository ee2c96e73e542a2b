/*
 * Copyright 2026 The rqat Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace rqat {

enum class ErrorKind {
    parameter,
    shape,
    configuration,
    ingest,
    input,
    io,
};

/// Base of every exception thrown by the library. The C API maps `kind()`
/// onto its status codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ParameterError : Error {
    explicit ParameterError(const std::string& w) : Error(ErrorKind::parameter, w) {}
};
struct ShapeError : Error {
    explicit ShapeError(const std::string& w) : Error(ErrorKind::shape, w) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error(ErrorKind::configuration, w) {}
};
struct IngestError : Error {
    explicit IngestError(const std::string& w) : Error(ErrorKind::ingest, w) {}
};
struct InputError : Error {
    explicit InputError(const std::string& w) : Error(ErrorKind::input, w) {}
};
struct IoError : Error {
    explicit IoError(const std::string& w) : Error(ErrorKind::io, w) {}
};

}  // namespace rqat
