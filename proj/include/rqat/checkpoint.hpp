/*
 * Copyright 2026 The rqat Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rqat/nn.hpp"
#include "rqat/trainkit.hpp"

namespace rqat {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Training phase a checkpoint was taken in.
enum class Phase { pretrain, main, done };

std::string_view to_string(Phase phase);

/// Full run state. Binary layout (all integers and IEEE doubles
/// little-endian):
///   "RQATCKPT" u32 version, run header, architecture, per-layer records,
///   u64 FNV-1a digest of all preceding bytes.
/// Codes and stuck-at masks are packed as u8 when bits <= 8 and as u16
/// otherwise; bit j of a code selects multiplier r_j.
struct Checkpoint {
    RunMode mode = RunMode::qat;
    Phase phase = Phase::done;
    int epochs_completed = 0;
    double final_accuracy = -1.0;  // -1 until the run finishes
    std::uint64_t seed = 0;
    std::string config_json;
    std::string metrics_jsonl;
    std::unique_ptr<Network> net;
};

std::vector<std::uint8_t> serialize(const Checkpoint& checkpoint);
/// Throws IngestError on truncated, corrupted or incompatible input.
Checkpoint deserialize(const std::vector<std::uint8_t>& bytes);

/// Writes via a temporary file and rename.
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace rqat
