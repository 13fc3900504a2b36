// Copyright 2026 The jurybt Authors.
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

#ifndef JURYBT_CLI_H_
#define JURYBT_CLI_H_

// Command-line front end. Subcommands: ingest, debias, cycles, fit,
// calibrate, eval, synth, judge. Every run writes a manifest next to its
// primary output recording the configuration, SHA-256 hashes of inputs and
// outputs, the tool version and the wall time. Failures are reported as one
// JSON line on the error stream with a nonzero exit status.

#include <iostream>
#include <string>
#include <string_view>

namespace jurybt {

int RunCli(int argc, const char* const* argv, std::ostream& out = std::cout,
           std::ostream& err = std::cerr);

// Lower-case hex SHA-256 digest.
std::string Sha256Hex(std::string_view data);
// Digest of a file's contents; throws Error when it cannot be read.
std::string Sha256File(const std::string& path);

}  // namespace jurybt

#endif  // JURYBT_CLI_H_
