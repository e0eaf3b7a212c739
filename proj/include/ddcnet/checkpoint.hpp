#pragma once

#include <string>

#include "ddcnet/parameters.hpp"

namespace ddcnet {

// Binary layout, all integers little-endian:
//
//   magic        8 bytes  "DDCNETCK"
//   version      u32 length + bytes (ParameterStore::kFormatVersion)
//   config       u32 length + bytes (NetConfig::serialize)
//   step u64, seed u64, wall_time f64
//   parameters   u64 count, then per tensor:
//                  u32 name length + name, u8 dtype (1 = f32, 2 = f64),
//                  u8 rank, rank x u64 dims, raw data
//   optimizer    u64 count, tensors in the same format
//   checksum     u64 FNV-1a over every preceding byte
//
// Tensors are written in name order, so equal stores give equal files.
template <typename Scalar>
void save_checkpoint(const ParameterStore<Scalar>& store, const std::string& path);

// Loads and checks the file against the architecture its config describes.
// Errors are CheckpointError with reason VersionMismatch, Corrupt,
// MissingTensor, ConfigMismatch or Io. When `expected` is given the stored
// config must equal it. f32/f64 payloads convert to Scalar on load.
template <typename Scalar>
ParameterStore<Scalar> load_checkpoint(const std::string& path,
                                       const NetConfig* expected = nullptr);

}  // namespace ddcnet
