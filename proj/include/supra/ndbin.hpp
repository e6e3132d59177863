#pragma once

// ndbin: magic "NDB1", u8 dtype (0 = f64 little-endian), u8 ndim,
// ndim x u64 little-endian extents, then the row-major payload.

#include <filesystem>
#include <stdexcept>
#include <string>

#include "supra/tensor.hpp"

namespace supra::ndbin {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string encode(const Tensor& t);
Tensor decode(const std::string& bytes);

void save(const Tensor& t, const std::filesystem::path& path);
Tensor load(const std::filesystem::path& path);

}  // namespace supra::ndbin
