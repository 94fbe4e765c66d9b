#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "alforge/tensor.hpp"

namespace alforge {

/// Malformed binary tensor file. `offset` is the byte position where
/// parsing failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at byte offset " + std::to_string(offset)), detail_(what), offset_(offset) {}
  std::size_t offset() const { return offset_; }
  const std::string& detail() const { return detail_; }

 private:
  std::string detail_;
  std::size_t offset_;
};

// Binary tensor file layout (all little-endian):
//   8 bytes  magic "ALF0TENS"
//   1 byte   element type (0x01 = float64, 0x02 = int32)
//   1 byte   rank
//   rank x 8 bytes dimensions
//   row-major payload
inline constexpr char kTensorMagic[8] = {'A', 'L', 'F', '0', 'T', 'E', 'N', 'S'};
inline constexpr std::uint8_t kTypeFloat64 = 0x01;
inline constexpr std::uint8_t kTypeInt32 = 0x02;

struct IntTensor {
  Shape shape;
  std::vector<std::int32_t> data;
};

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
std::vector<std::uint8_t> encode_tensor(const IntTensor& t);
Tensor decode_float_tensor(const std::vector<std::uint8_t>& bytes);
IntTensor decode_int_tensor(const std::vector<std::uint8_t>& bytes);

void write_tensor_file(const std::string& path, const Tensor& t);
void write_tensor_file(const std::string& path, const IntTensor& t);
Tensor read_float_tensor_file(const std::string& path);
IntTensor read_int_tensor_file(const std::string& path);

std::vector<std::uint8_t> read_bytes(const std::string& path);
void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace alforge
