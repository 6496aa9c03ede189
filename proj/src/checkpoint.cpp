#include "metaland/binary_io.hpp"
#include "metaland/errors.hpp"
#include "metaland/training.hpp"

namespace metaland {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;
constexpr const char* kCheckpointMagic = "MAMLCKPT";

}  // namespace

void save_checkpoint(const Checkpoint& cp, const std::filesystem::path& path) {
  io::Writer w;
  w.bytes(kCheckpointMagic, 8);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(cp.provenance));
  w.put<std::uint64_t>(cp.iteration);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cp.params.size()));
  for (const auto& [name, t] : cp.params) {
    if (name.size() > 0xffff) throw ValidationError("checkpoint: parameter name too long");
    if (t.ndim() > 0xff) throw ValidationError("checkpoint: too many dimensions in '" + name + "'");
    w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.put<std::uint8_t>(static_cast<std::uint8_t>(t.ndim()));
    for (auto d : t.shape()) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    for (double v : t.data()) w.put<double>(v);
  }
  w.save(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  io::Reader r(path);
  r.expect_magic(kCheckpointMagic);
  const auto version_at = r.offset();
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) throw UnsupportedVersion(r.path(), version_at, version);
  Checkpoint cp;
  const auto prov_at = r.offset();
  const auto prov = r.get<std::uint8_t>("provenance");
  if (prov > 2) throw FormatError(r.path(), prov_at, "unknown provenance " + std::to_string(prov));
  cp.provenance = static_cast<Provenance>(prov);
  cp.iteration = r.get<std::uint64_t>("iteration");
  const auto count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint16_t>("name length");
    std::string name(name_len, '\0');
    r.bytes(name.data(), name_len, "name");
    const auto ndim = r.get<std::uint8_t>("ndim");
    Shape shape;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      const auto dim_at = r.offset();
      const auto dim = r.get<std::uint32_t>("dimension");
      if (dim == 0) throw FormatError(r.path(), dim_at, "zero dimension in '" + name + "'");
      shape.push_back(dim);
    }
    if (static_cast<std::uint64_t>(numel(shape)) > r.remaining() / sizeof(double)) {
      throw FormatError(r.path(), r.offset(), "truncated file while reading tensor data of '" + name + "'");
    }
    std::vector<double> values(static_cast<std::size_t>(numel(shape)));
    for (auto& v : values) v = r.get<double>("tensor data");
    try {
      cp.params.add(name, Tensor::from_data(shape, std::move(values)));
    } catch (const ValidationError& e) {
      throw FormatError(r.path(), r.offset(), e.what());
    }
  }
  if (!r.at_end()) throw FormatError(r.path(), r.offset(), "trailing bytes after last tensor");
  return cp;
}

}  // namespace metaland
