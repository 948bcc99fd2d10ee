// Copyright 2026 The qrev Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * @file
 * Exception types shared by every qrev module.
 */
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qrev {

/// Root of the qrev exception hierarchy.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class InvalidAngle : public Error {
  public:
    using Error::Error;
};

class BindError : public Error {
  public:
    using Error::Error;
};

/// Text-format error carrying a 1-based source location.
class ParseError : public Error {
  public:
    ParseError(std::size_t line, std::size_t column, const std::string &what)
        : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
          line_(line),
          column_(column) {
    }
    std::size_t line() const noexcept {
        return line_;
    }
    std::size_t column() const noexcept {
        return column_;
    }

  private:
    std::size_t line_;
    std::size_t column_;
};

class DimensionError : public Error {
  public:
    using Error::Error;
};

class ResourceError : public Error {
  public:
    using Error::Error;
};

class TranspileError : public Error {
  public:
    using Error::Error;
};

/// A transpiled segment whose signature has no LUT entry.
class UnmatchedSegment : public Error {
  public:
    UnmatchedSegment(std::size_t wire, std::size_t position, const std::string &signature)
        : Error("unmatched segment on wire " + std::to_string(wire) + " at position " + std::to_string(position) +
                ": [" + signature + "]"),
          wire(wire),
          position(position) {
    }
    std::size_t wire;
    std::size_t position;
};

class AmbiguousSegment : public Error {
  public:
    using Error::Error;
};

class FormatError : public Error {
  public:
    using Error::Error;
};

class TrainingDiverged : public Error {
  public:
    TrainingDiverged(std::size_t epoch, const std::string &what)
        : Error("training diverged at epoch " + std::to_string(epoch) + ": " + what), epoch(epoch) {
    }
    std::size_t epoch;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

/// Recovered structure disagrees with the known victim.
class StructureMismatch : public Error {
  public:
    using Error::Error;
};

}  // namespace qrev
