/* Copyright 2026 The EdgeSpot Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef EDGESPOT_CLI_HPP_
#define EDGESPOT_CLI_HPP_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "edgespot/model.hpp"

namespace edgespot {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// Entry point of the `edgespot` tool. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

// WAV files directly inside `dir`, sorted by path.
std::vector<std::filesystem::path> list_wavs(const std::filesystem::path& dir);

// read_wav -> melspec -> embed.
Embedding embed_file(const std::filesystem::path& wav,
                     const ModelParams& params);

}  // namespace edgespot

#endif  // EDGESPOT_CLI_HPP_
