#include "globenet/io.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include "globenet/error.hpp"

namespace globenet::io {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place: " + path.string());
  }
}

std::string_view ByteReader::take(std::size_t n, const char* what) {
  if (remaining() < n) {
    throw FormatError(std::string("truncated payload while reading ") + what);
  }
  std::string_view s = bytes_.substr(pos_, n);
  pos_ += n;
  return s;
}

std::uint32_t ByteReader::u32(const char* what) {
  const std::string_view s = take(4, what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[i])) << (8 * i);
  }
  return v;
}

float ByteReader::f32(const char* what) {
  const std::uint32_t bits = u32(what);
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

}  // namespace globenet::io
