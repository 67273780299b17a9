#include "sdgcount/npy.hpp"

#include <cstring>
#include <fstream>
#include <regex>

#include "sdgcount/errors.hpp"

namespace sdgcount {

namespace {
constexpr char kMagic[] = "\x93NUMPY";
}

void save_npy(const Tensor& tensor, const std::filesystem::path& path) {
  std::string shape = "(";
  for (auto d : tensor.shape()) shape += std::to_string(d) + ", ";
  if (tensor.rank() > 1) shape.erase(shape.size() - 2);
  else if (tensor.rank() == 1) shape.erase(shape.size() - 1);
  shape += ")";
  std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': " + shape + ", }";
  // Magic(6) + version(2) + length(2) + header + '\n' padded to a multiple of 64.
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header += '\n';

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kMagic, 6);
  const char version[2] = {1, 0};
  out.write(version, 2);
  const auto len = static_cast<std::uint16_t>(header.size());
  const char len_bytes[2] = {static_cast<char>(len & 0xff), static_cast<char>(len >> 8)};
  out.write(len_bytes, 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(tensor.data()), static_cast<std::streamsize>(tensor.numel() * 8));
  if (!out) throw Error("failed writing " + path.string());
}

Tensor load_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  char magic[6];
  char version[2];
  in.read(magic, 6);
  in.read(version, 2);
  if (!in || std::memcmp(magic, kMagic, 6) != 0) throw DataError("not an .npy file: " + path.string());
  std::uint32_t header_len = 0;
  if (version[0] == 1) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    header_len = b[0] | (b[1] << 8);
  } else {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    header_len = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::string header(header_len, '\0');
  in.read(header.data(), header_len);
  if (!in) throw DataError("truncated .npy header: " + path.string());

  std::smatch m;
  if (!std::regex_search(header, m, std::regex(R"('descr':\s*'([<|>]?[fi][48])')"))) {
    throw DataError("unsupported dtype in " + path.string());
  }
  const std::string descr = m[1];
  if (std::regex_search(header, std::regex(R"('fortran_order':\s*True)"))) {
    throw DataError("fortran-ordered arrays are not supported: " + path.string());
  }
  if (!std::regex_search(header, m, std::regex(R"('shape':\s*\(([^)]*)\))"))) {
    throw DataError("missing shape in " + path.string());
  }
  Shape shape;
  const std::string dims = m[1];
  std::regex num(R"(\d+)");
  for (auto it = std::sregex_iterator(dims.begin(), dims.end(), num); it != std::sregex_iterator(); ++it) {
    shape.push_back(std::stoll(it->str()));
  }
  Tensor out(shape);
  if (descr == "<f8" || descr == "f8") {
    in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.numel() * 8));
  } else if (descr == "<f4" || descr == "f4") {
    std::vector<float> buf(static_cast<std::size_t>(out.numel()));
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
    for (std::size_t i = 0; i < buf.size(); ++i) out[static_cast<std::int64_t>(i)] = buf[i];
  } else {
    throw DataError("unsupported dtype " + descr + " in " + path.string());
  }
  if (!in) throw DataError("truncated .npy payload: " + path.string());
  return out;
}

}  // namespace sdgcount
