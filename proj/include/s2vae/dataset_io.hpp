#pragma once

#include <string>

#include "s2vae/synthetic.hpp"

namespace s2vae::data {

inline constexpr int kDatasetFormatVersion = 1;

/// Writes `dir/manifest.json` and one `scene_NNNNNN.bin` per scene. Each
/// record is little-endian f64, in order: factors (K), every feature layer
/// (tokens x d_l, row-major), depth (P x P, row-major), pose (7).
void save_dataset(const Dataset& ds, const std::string& dir);
/// Inverse of save_dataset; values round-trip bit-exactly.
Dataset load_dataset(const std::string& dir);

}  // namespace s2vae::data
