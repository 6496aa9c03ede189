#include "metaland/binary_io.hpp"

#include <fstream>
#include <iterator>

namespace metaland::io {

void Writer::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw OutputError(path.string());
  out.write(reinterpret_cast<const char*>(buffer_.data()), static_cast<std::streamsize>(buffer_.size()));
  if (!out) throw OutputError(path.string());
}

Reader::Reader(const std::filesystem::path& path) : path_(path.string()) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInput(path_);
  data_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void Reader::expect_magic(const std::string& magic) {
  const auto start = offset_;
  std::string found(magic.size(), '\0');
  if (data_.size() - offset_ < magic.size()) throw FormatError(path_, start, "bad magic (file too short)");
  bytes(found.data(), found.size(), "magic");
  if (found != magic) throw FormatError(path_, start, "bad magic, expected \"" + magic + "\"");
}

}  // namespace metaland::io
