// Copyright 2026 The CAG Surrogate Authors
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

#ifndef CAG_ERROR_HPP
#define CAG_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cag {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class DuplicateInput : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

class NumericalFailure : public Error {
public:
    using Error::Error;
};

class VersionMismatch : public Error {
public:
    using Error::Error;
};

class DivisionByZero : public Error {
public:
    using Error::Error;
};

/// Adaptive sampling could not give every cluster Q_min members.
class ConvergenceFailure : public Error {
public:
    struct Deficit {
        std::size_t cluster;
        std::size_t count;
    };

    ConvergenceFailure(const std::string& what, std::vector<Deficit> deficits)
        : Error(what), deficits_(std::move(deficits)) {}

    [[nodiscard]] const std::vector<Deficit>& deficits() const noexcept { return deficits_; }

private:
    std::vector<Deficit> deficits_;
};

} // namespace cag

#endif // CAG_ERROR_HPP
