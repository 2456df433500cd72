#include "adn/tensor_io.hpp"

#include <fstream>
#include <iterator>

#include "adn/binary.hpp"

namespace adn {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<std::uint8_t> encode_adnt(const Tensor& t) {
  ByteWriter w;
  w.bytes("ADNT");
  w.u8(kAdntVersion);
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
  for (float v : t.data()) w.f32(v);
  return w.take();
}

Tensor decode_adnt(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.bytes(4) != "ADNT") throw FormatError("bad ADNT magic", 0);
  if (const auto v = r.u8(); v != kAdntVersion) {
    throw FormatError("unsupported ADNT version " + std::to_string(v), 4);
  }
  const std::uint32_t rank = r.u32();
  if (rank > 8) throw FormatError("implausible ADNT rank " + std::to_string(rank), 5);
  Shape shape;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const auto d = r.u32();
    if (d == 0) r.fail("zero dimension in ADNT header");
    shape.push_back(d);
    count *= d;
  }
  if (count * 4 != r.remaining()) {
    r.fail("ADNT payload holds " + std::to_string(r.remaining()) + " bytes, header implies " +
           std::to_string(count * 4));
  }
  std::vector<float> values(count);
  for (auto& v : values) v = r.f32();
  return Tensor(std::move(shape), std::move(values));
}

void write_adnt(const std::filesystem::path& path, const Tensor& t) { write_file_bytes(path, encode_adnt(t)); }

Tensor read_adnt(const std::filesystem::path& path) { return decode_adnt(read_file_bytes(path)); }

}  // namespace adn
