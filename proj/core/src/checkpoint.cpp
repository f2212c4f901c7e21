#include "s4al/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "s4al/errors.hpp"

namespace s4al {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'S', '4', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("checkpoint truncated");
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  if (n > (1ULL << 32)) throw DataError("checkpoint string too long");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw DataError("checkpoint truncated");
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const std::string& config_echo) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kVersion);
    const auto& a = params.arch;
    for (int v : {a.in_channels, a.num_classes, a.embed_dim, a.enc_channels[0], a.enc_channels[1],
                  a.enc_channels[2], a.dec_channels})
      put<std::int32_t>(out, v);
    put<double>(out, a.dropout);
    put_string(out, config_echo);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params.tensors.size()));
    for (const auto& t : params.tensors) {
      put_string(out, t.name);
      put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
      for (int d : t.shape) put<std::int32_t>(out, d);
      out.write(reinterpret_cast<const char*>(t.values.data()),
                static_cast<std::streamsize>(t.values.size() * sizeof(double)));
    }
    if (!out) throw DataError("cannot write checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw DataError("not a checkpoint: " + path.string());
  if (get<std::uint32_t>(in) != kVersion) throw DataError("unsupported checkpoint version");
  Checkpoint ck;
  auto& a = ck.params.arch;
  a.in_channels = get<std::int32_t>(in);
  a.num_classes = get<std::int32_t>(in);
  a.embed_dim = get<std::int32_t>(in);
  for (auto& c : a.enc_channels) c = get<std::int32_t>(in);
  a.dec_channels = get<std::int32_t>(in);
  a.dropout = get<double>(in);
  ck.config_echo = get_string(in);
  const auto count = get<std::uint32_t>(in);
  // Shapes are validated against a fresh initialisation of the stored architecture.
  try {
    a.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint architecture invalid: ") + e.what());
  }
  const ModelParams expected = init_model(0, a);
  if (count != expected.tensors.size()) throw DataError("checkpoint tensor count mismatch");
  for (std::uint32_t k = 0; k < count; ++k) {
    Parameter p;
    p.name = get_string(in);
    const auto ndim = get<std::uint32_t>(in);
    if (ndim > 8) throw DataError("checkpoint tensor rank too large");
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      p.shape.push_back(get<std::int32_t>(in));
      n *= static_cast<std::size_t>(p.shape.back());
    }
    if (p.name != expected.tensors[k].name || p.shape != expected.tensors[k].shape)
      throw DataError("checkpoint tensor mismatch at " + p.name);
    p.values.resize(n);
    in.read(reinterpret_cast<char*>(p.values.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw DataError("checkpoint truncated");
    ck.params.tensors.push_back(std::move(p));
  }
  return ck;
}

}  // namespace s4al
