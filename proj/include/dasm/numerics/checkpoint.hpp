// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dasm/numerics/parameter.hpp"

DASM_BEGIN_NAMESPACE
namespace num {

/// Flat parameter archive. On disk (all integers little-endian):
///
///   "DASMCKPT"            8-byte magic
///   u32 format            currently 1
///   u32 n, n bytes        version string
///   u32 n, n bytes        metadata (free text, the CLI stores model config JSON)
///   u32 count             number of entries, then per entry:
///     u32 n, n bytes      name path
///     u32 rank, rank×u64  shape
///     f32 × size          payload, IEEE-754 binary32 little-endian
struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<float> values;
  bool operator==(const CheckpointEntry&) const = default;
};

struct Checkpoint {
  std::string version;
  std::string metadata;
  std::vector<CheckpointEntry> entries;
  bool operator==(const Checkpoint&) const = default;
};

inline constexpr const char* kCheckpointVersion = "dasm-checkpoint/1.0";

Checkpoint capture(const ParameterList& params, std::string metadata = {});
/// Copies values by name; every parameter must be present with its shape.
void restore(const Checkpoint& ckpt, const ParameterList& params);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);
std::vector<char> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<char>& bytes);

}  // namespace num
DASM_END_NAMESPACE
