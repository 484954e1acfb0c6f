/*
 * Copyright 2026 The sccvfl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef SCCVFL_ERROR_HPP_
#define SCCVFL_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace sccvfl {

// One exception type for the whole library; `kind` distinguishes the
// contract that was violated so tests and the CLI can react per family.
class Error : public std::runtime_error {
 public:
  enum class Kind {
    kSchema,    // column schema invalid or missing columns
    kIngest,    // unparseable input data
    kLayout,    // vertical layout overlap / coverage
    kSplit,     // infeasible split request
    kShape,     // tensor dimension mismatch
    kConfig,    // unknown method, bad manifest, missing loss term
    kBudget,    // privacy ledger exhausted
    kContract,  // stale cache, version mismatch, misuse of an API
    kDomain,    // parameter outside its mathematical domain
    kOracle,    // test oracle failure (non-finite loss, zero step)
    kIo,        // file read/write failure
  };

  Error(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline void check(bool cond, Error::Kind kind, const std::string& message) {
  if (!cond) throw Error(kind, message);
}

}  // namespace sccvfl

#endif  // SCCVFL_ERROR_HPP_
