// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>

#include "sponet/spon.hpp"

namespace sponet
{

inline constexpr char kCheckpointMagic[8] = {'S', 'P', 'O', 'N', 'C', 'K', '1', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const SponModel &model, const std::filesystem::path &path);
// Rebuilds the model from the stored configuration and copies parameters in
// by name. Missing, extra or mis-shaped arrays are errors.
std::unique_ptr<SponModel> load_checkpoint(const std::filesystem::path &path);

}  // namespace sponet
