#include "vcut/numerics/vten.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace vcut {

namespace {

constexpr std::uint8_t kMagic[4] = {0x56, 0x54, 0x45, 0x4E};
constexpr std::size_t kHeaderSize = 8;

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(p[i]) << (8 * i);
  return value;
}

template <typename T, typename U>
void put_payload(std::vector<std::uint8_t>& out, std::span<const T> values) {
  for (T v : values) put_le<U>(out, std::bit_cast<U>(v));
}

template <typename T, typename U>
std::vector<T> get_payload(const std::uint8_t* p, std::size_t count) {
  std::vector<T> values(count);
  for (std::size_t i = 0; i < count; ++i) values[i] = std::bit_cast<T>(get_le<U>(p + i * sizeof(U)));
  return values;
}

}  // namespace

std::vector<std::uint8_t> encode_vten(const Tensor& tensor) {
  if (tensor.rank() > 255) throw ShapeError("VTEN supports rank <= 255");
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  const std::size_t payload = static_cast<std::size_t>(tensor.numel()) * (tensor.dtype() == DType::kF32 ? 4 : 8);
  out.reserve(kHeaderSize + 8 * tensor.rank() + payload);
  out.push_back(kVtenVersion);
  out.push_back(static_cast<std::uint8_t>(tensor.dtype()));
  out.push_back(static_cast<std::uint8_t>(tensor.rank()));
  out.push_back(0);
  for (auto d : tensor.dims()) put_le<std::uint64_t>(out, static_cast<std::uint64_t>(d));
  if (tensor.dtype() == DType::kF32) {
    put_payload<float, std::uint32_t>(out, tensor.data<float>());
  } else {
    put_payload<double, std::uint64_t>(out, tensor.data<double>());
  }
  return out;
}

Tensor decode_vten(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw IoError("not a VTEN file (bad magic)");
  }
  if (bytes[4] != kVtenVersion) throw IoError("unsupported VTEN version " + std::to_string(bytes[4]));
  if (bytes[5] > 1) throw IoError("unknown VTEN dtype code " + std::to_string(bytes[5]));
  if (bytes[7] != 0) throw IoError("VTEN reserved byte must be zero");
  const auto dtype = static_cast<DType>(bytes[5]);
  const std::size_t rank = bytes[6];
  if (rank == 0) throw IoError("VTEN rank must be >= 1");
  if (bytes.size() < kHeaderSize + 8 * rank) throw IoError("truncated VTEN header");
  Dims dims(rank);
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    const auto extent = get_le<std::uint64_t>(bytes.data() + kHeaderSize + 8 * i);
    if (extent == 0 || extent > (1ULL << 40)) throw IoError("invalid VTEN extent");
    dims[i] = static_cast<std::int64_t>(extent);
    count *= static_cast<std::size_t>(extent);
  }
  const std::size_t width = dtype == DType::kF32 ? 4 : 8;
  const std::size_t offset = kHeaderSize + 8 * rank;
  if (bytes.size() != offset + count * width) {
    throw IoError("VTEN payload is " + std::to_string(bytes.size() - offset) + " bytes, expected " +
                  std::to_string(count * width));
  }
  if (dtype == DType::kF32) return Tensor(dims, get_payload<float, std::uint32_t>(bytes.data() + offset, count));
  return Tensor(dims, get_payload<double, std::uint64_t>(bytes.data() + offset, count));
}

void write_vten(const std::filesystem::path& path, const Tensor& tensor) {
  const auto bytes = encode_vten(tensor);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

Tensor read_vten(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  try {
    return decode_vten(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace vcut
