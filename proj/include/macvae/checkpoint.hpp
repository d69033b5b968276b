#pragma once

#include <string>

#include "macvae/numerics.hpp"

namespace macvae {

// Versioned binary container: magic, version, a free-form text header (model
// specs and config), then named f64 tensors with shapes, row-major payloads.
// Round-trips bit-exactly.
namespace checkpoint {

constexpr std::uint32_t kVersion = 1;

void save(const std::string& path, const std::string& header, const ParameterStore& store);

// Loads tensors into `store`, creating slots as needed; returns the header.
std::string load(const std::string& path, ParameterStore& store);

}  // namespace checkpoint

}  // namespace macvae
