// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint directory:
//   manifest.txt   "matsod-checkpoint 1", then `config <key> = <value>` lines
//                  and one `param <name> <rows> <cols> f64 <file>` line per
//                  tensor, in registration order.
//   <name>.bin     8-byte magic "MATSODT\x01", rows and cols as little-endian
//                  u64, then rows*cols little-endian f64 values, row-major.

#pragma once

#include <memory>
#include <string>

#include "core/config.hpp"
#include "pipeline/model.hpp"

namespace matsod::pipeline {

inline constexpr int kCheckpointVersion = 1;

// `extra` is stored next to the model config (e.g. train.* keys).
void save_checkpoint(const Model& model, const std::string& dir, const KeyValues& extra = {});

// Config snapshot stored in a checkpoint (model.* and any extra keys).
KeyValues read_checkpoint_config(const std::string& dir);

// Overwrites every parameter of `model`. Throws Error(kShape) naming the
// first parameter whose shape differs and Error(kFormat) on a bad version,
// corrupt blob or a parameter set that does not match.
void load_into(Model& model, const std::string& dir);

// Builds a model from the stored config and loads its parameters.
std::unique_ptr<Model> load_checkpoint(const std::string& dir);

}  // namespace matsod::pipeline
