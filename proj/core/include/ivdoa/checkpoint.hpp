#pragma once

#include <stdexcept>
#include <string>

#include "ivdoa/net.hpp"

namespace ivdoa {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Binary checkpoint layout (all integers and floats little-endian):
//
//   bytes 0..7    magic "IVDOANET"
//   u32           format version (currently 1)
//   u32           descriptor length N
//   N bytes       architecture descriptor, key=value lines:
//                 in_channels, bands, conv_channels (comma separated),
//                 gru_hidden, bn_eps, bn_momentum
//   u32           tensor count
//   per tensor:   u32 name length, name bytes,
//                 u32 ndim, u64 dims[ndim],
//                 f64 data, row-major
//
// Tensors appear in the order of NetworkParams::for_each_tensor, followed
// by bn0..bn2 running_mean / running_var.
void save_checkpoint(const std::string& path, const NetworkParams& p);

NetworkParams load_checkpoint(const std::string& path);

}  // namespace ivdoa
