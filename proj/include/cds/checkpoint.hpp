// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container, all integers little-endian:
//   "CDSP1"
//   u32 channels, u32 gate_reduction, u32 d, u32 record count
//   per record: u32 name length, name bytes, u8 dtype (0 = f32), u32 rank,
//               rank x u32 dims, row-major f32 data
// Records follow named_tensors() order.

#pragma once

#include <filesystem>

#include "cds/model.hpp"

namespace cds {

inline constexpr char kCheckpointMagic[] = "CDSP1";

void save_checkpoint(const std::filesystem::path& path, ModelParams<float>& params);
// Throws DataError on a bad magic, truncation, or any name/shape mismatch
// against the architecture recorded in the header.
ModelParams<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace cds
