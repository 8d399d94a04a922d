/*
 * Copyright 2026 the agroval authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
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
#include <utility>

namespace agroval {

/// Broad error families, mapped to process exit codes by the CLI:
/// Usage -> 1, Data -> 2, Run -> 3.
enum class ErrorClass { Usage, Data, Run };

/// All library failures carry a short category name (e.g. "MalformedRow",
/// "DegenerateFit") so callers and the CLI can report them uniformly.
class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, std::string category, const std::string& message)
      : std::runtime_error(category + ": " + message),
        class_(cls),
        category_(std::move(category)) {}

  ErrorClass error_class() const noexcept { return class_; }
  const std::string& category() const noexcept { return category_; }

  static Error data(std::string category, const std::string& message) {
    return Error(ErrorClass::Data, std::move(category), message);
  }
  static Error run(std::string category, const std::string& message) {
    return Error(ErrorClass::Run, std::move(category), message);
  }
  static Error usage(std::string category, const std::string& message) {
    return Error(ErrorClass::Usage, std::move(category), message);
  }

 private:
  ErrorClass class_;
  std::string category_;
};

}  // namespace agroval
