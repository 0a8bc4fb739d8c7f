#pragma once

#include <filesystem>

#include "dnnshield/model.hpp"

namespace dnnshield {

/// Model files: a JSON manifest (magic "DNS1", version, layers, shapes, strides, pads)
/// plus one binary blob per parameter tensor next to it. Each blob is the 4-byte magic
/// "DNS1" followed by little-endian float32 values; the manifest records every blob's
/// file name and payload byte length.
void save_model(const Model& model, const std::filesystem::path& manifest_path);
Model load_model(const std::filesystem::path& manifest_path);

/// Dataset container: "DSET", u32 count, u32 rank, u32 dims[rank], count tensors of
/// little-endian float32, then count little-endian u16 labels.
void save_dataset(const LabeledDataset& dataset, const std::filesystem::path& path);
LabeledDataset load_dataset(const std::filesystem::path& path);

}  // namespace dnnshield
