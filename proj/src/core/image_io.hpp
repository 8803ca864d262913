// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "core/types.hpp"

namespace matsod {

// Colour PNGs load as 3 channels, grey PNGs as 1; alpha is dropped and 16-bit
// samples are reduced to 8 bits. Values are mapped to [0, 1].
Image read_png(const std::string& path);

// Writes 8-bit grey (1 channel) or RGB (3 channels); values are clamped to
// [0, 1] and rounded to the nearest level.
void write_png(const std::string& path, const Image& image);

}  // namespace matsod
