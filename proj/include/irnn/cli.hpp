// SPDX-License-Identifier: Apache-2.0
//
// `irnn` command line: synth, prepare, train, evaluate, explain, compare.
#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace irnn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

inline constexpr double kTestFraction = 0.2;
inline constexpr double kValidationFraction = 0.2;
inline constexpr std::size_t kDefaultSeeds = 5;

int run(int argc, const char* const* argv);

/// Maps library exceptions onto the exit codes above.
int exit_code_for(const std::exception& e);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// Split protocol shared by `prepare`, `train` and the acceptance suite.

struct Partition {
  std::vector<std::size_t> first, second;
};

/// Stratified dev/test hold-out drawn from the master seed.
Partition hold_out(std::span<const int> labels, std::uint64_t master_seed);

/// Stratified train/validation split of the dev pool for run k.
Partition seed_split(std::span<const int> dev_labels, std::uint64_t master_seed,
                     std::size_t k);

/// Seed handed to train_model for run k.
std::uint64_t run_seed(std::uint64_t master_seed, std::size_t k);

}  // namespace irnn::cli
