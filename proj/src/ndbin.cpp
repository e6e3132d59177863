#include "supra/ndbin.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace supra::ndbin {

namespace {

static_assert(std::endian::native == std::endian::little, "ndbin writer assumes a little-endian host");

constexpr char kMagic[4] = {'N', 'D', 'B', '1'};
constexpr std::uint8_t kF64 = 0;

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

}  // namespace

std::string encode(const Tensor& t) {
  const Shape& s = t.shape();
  if (s.size() > 255) throw FormatError("ndbin: too many dimensions");
  std::string out(kMagic, 4);
  put<std::uint8_t>(out, kF64);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(s.size()));
  for (std::size_t e : s) put<std::uint64_t>(out, e);
  out.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double));
  return out;
}

Tensor decode(const std::string& bytes) {
  if (bytes.size() < 6 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("ndbin: bad magic");
  const auto dtype = static_cast<std::uint8_t>(bytes[4]);
  const auto ndim = static_cast<std::uint8_t>(bytes[5]);
  if (dtype != kF64) throw FormatError("ndbin: unsupported dtype code " + std::to_string(dtype));
  std::size_t off = 6;
  if (bytes.size() < off + 8u * ndim) throw FormatError("ndbin: truncated header");
  Shape shape(ndim);
  std::size_t count = 1;
  for (auto& e : shape) {
    std::uint64_t v;
    std::memcpy(&v, bytes.data() + off, 8);
    off += 8;
    e = static_cast<std::size_t>(v);
    count *= e;
  }
  if (bytes.size() - off != count * sizeof(double))
    throw FormatError("ndbin: payload holds " + std::to_string(bytes.size() - off) + " bytes, header implies " +
                      std::to_string(count * sizeof(double)));
  std::vector<double> data(count);
  if (count) std::memcpy(data.data(), bytes.data() + off, count * sizeof(double));
  if (shape.empty()) shape = {1};
  return Tensor(std::move(shape), std::move(data));
}

void save(const Tensor& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("ndbin: cannot write " + path.string());
  const std::string bytes = encode(t);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("ndbin: write failed for " + path.string());
}

Tensor load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("ndbin: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode(ss.str());
}

}  // namespace supra::ndbin
