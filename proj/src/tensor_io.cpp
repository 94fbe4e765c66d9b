#include "alforge/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace alforge {

namespace {

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::vector<std::uint8_t> encode_header(std::uint8_t type, const Shape& shape) {
  if (shape.size() > 255) throw DimensionError("tensor rank exceeds 255");
  std::vector<std::uint8_t> out(kTensorMagic, kTensorMagic + 8);
  out.push_back(type);
  out.push_back(static_cast<std::uint8_t>(shape.size()));
  for (std::size_t d : shape) put_u64(out, d);
  return out;
}

struct Header {
  std::uint8_t type;
  Shape shape;
  std::size_t count;
  std::size_t payload_offset;
};

Header decode_header(const std::vector<std::uint8_t>& bytes, std::uint8_t expected_type, std::size_t elem_size) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kTensorMagic, 8) != 0) {
    throw FormatError("bad tensor magic", 0);
  }
  if (bytes.size() < 10) throw FormatError("truncated tensor header", bytes.size());
  Header h{bytes[8], {}, 1, 0};
  if (h.type != kTypeFloat64 && h.type != kTypeInt32) throw FormatError("unknown element type code", 8);
  if (h.type != expected_type) throw FormatError("unexpected element type code", 8);
  const std::size_t rank = bytes[9];
  std::size_t off = 10;
  const std::size_t max_count = std::numeric_limits<std::size_t>::max() / elem_size;
  for (std::size_t r = 0; r < rank; ++r) {
    if (off + 8 > bytes.size()) throw FormatError("truncated tensor dimensions", bytes.size());
    const std::uint64_t d = get_u64(bytes.data() + off);
    if (d != 0 && h.count > max_count / d) throw FormatError("tensor dimension overflow", off);
    h.count *= d;
    h.shape.push_back(static_cast<std::size_t>(d));
    off += 8;
  }
  h.payload_offset = off;
  const std::size_t available = bytes.size() - off;
  if (available < h.count * elem_size) throw FormatError("truncated tensor payload", bytes.size());
  if (available > h.count * elem_size) throw FormatError("trailing bytes after tensor payload", off + h.count * elem_size);
  return h;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  auto out = encode_header(kTypeFloat64, t.shape());
  out.reserve(out.size() + t.size() * 8);
  for (double v : t.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

std::vector<std::uint8_t> encode_tensor(const IntTensor& t) {
  if (shape_size(t.shape) != t.data.size()) throw DimensionError("int tensor data does not match shape");
  auto out = encode_header(kTypeInt32, t.shape);
  out.reserve(out.size() + t.data.size() * 4);
  for (std::int32_t v : t.data) put_u32(out, static_cast<std::uint32_t>(v));
  return out;
}

Tensor decode_float_tensor(const std::vector<std::uint8_t>& bytes) {
  const Header h = decode_header(bytes, kTypeFloat64, 8);
  std::vector<double> data(h.count);
  const std::uint8_t* p = bytes.data() + h.payload_offset;
  for (std::size_t i = 0; i < h.count; ++i) data[i] = std::bit_cast<double>(get_u64(p + 8 * i));
  return Tensor(h.shape, std::move(data));
}

IntTensor decode_int_tensor(const std::vector<std::uint8_t>& bytes) {
  const Header h = decode_header(bytes, kTypeInt32, 4);
  IntTensor t{h.shape, std::vector<std::int32_t>(h.count)};
  const std::uint8_t* p = bytes.data() + h.payload_offset;
  for (std::size_t i = 0; i < h.count; ++i) t.data[i] = static_cast<std::int32_t>(get_u32(p + 4 * i));
  return t;
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path);
}

void write_tensor_file(const std::string& path, const Tensor& t) { write_bytes(path, encode_tensor(t)); }
void write_tensor_file(const std::string& path, const IntTensor& t) { write_bytes(path, encode_tensor(t)); }

Tensor read_float_tensor_file(const std::string& path) {
  try {
    return decode_float_tensor(read_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.detail(), e.offset());
  }
}

IntTensor read_int_tensor_file(const std::string& path) {
  try {
    return decode_int_tensor(read_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.detail(), e.offset());
  }
}

}  // namespace alforge
