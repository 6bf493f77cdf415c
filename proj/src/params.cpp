#include "vecoff/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "vecoff/errors.hpp"
#include "vecoff/rng.hpp"

namespace vecoff::nn {

std::size_t ParamRegistry::add(std::string name, std::size_t rows, std::size_t cols, bool bias,
                               std::size_t fan_in, std::size_t fan_out) {
  ParamBlock b{std::move(name), rows, cols, total_, bias, fan_in, fan_out};
  total_ += b.size();
  blocks_.push_back(std::move(b));
  return blocks_.size() - 1;
}

std::size_t ParamRegistry::find(const std::string& name) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    if (blocks_[i].name == name) return i;
  throw std::out_of_range("no parameter block named " + name);
}

std::string ParamRegistry::manifest() const {
  std::ostringstream os;
  for (const auto& b : blocks_) os << b.name << ' ' << b.rows << ' ' << b.cols << '\n';
  return os.str();
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::span<const double> values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : values) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::uint64_t ParamRegistry::manifest_hash() const { return fnv1a64(manifest()); }

ParamVector init_params(const ParamRegistry& registry, std::uint64_t seed) {
  ParamVector p{registry, std::vector<double>(registry.total_size(), 0.0)};
  Rng rng(seed);
  for (std::size_t i = 0; i < registry.blocks().size(); ++i) {
    const auto& b = registry.block(i);
    if (b.bias) continue;
    const double limit = std::sqrt(6.0 / static_cast<double>(b.fan_in + b.fan_out));
    for (double& x : p.block(i)) x = rng.uniform(-limit, limit);
  }
  return p;
}

namespace {

constexpr char kMagic[8] = {'V', 'E', 'C', 'O', 'F', 'F', 'P', 'V'};

void put_u64(std::ostream& out, std::uint64_t x) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((x >> (8 * i)) & 0xffu);
  out.write(buf, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) throw InputError("truncated parameter block");
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return x;
}

}  // namespace

void write_params(std::ostream& out, const ParamVector& params) {
  out.write(kMagic, sizeof kMagic);
  const std::string manifest = params.registry.manifest();
  put_u64(out, manifest.size());
  out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
  put_u64(out, params.registry.manifest_hash());
  put_u64(out, params.values.size());
  for (double v : params.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

ParamVector read_params(std::istream& in, const ParamRegistry& expected) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw InputError("not a parameter block");
  const std::uint64_t len = get_u64(in);
  if (len > (1u << 24)) throw InputError("parameter manifest too large");
  std::string manifest(len, '\0');
  if (!in.read(manifest.data(), static_cast<std::streamsize>(len)))
    throw InputError("truncated parameter manifest");
  const std::uint64_t hash = get_u64(in);
  if (hash != fnv1a64(manifest) || hash != expected.manifest_hash())
    throw InputError("parameter manifest hash mismatch");
  const std::uint64_t count = get_u64(in);
  if (count != expected.total_size()) throw InputError("parameter count mismatch");
  ParamVector p{expected, std::vector<double>(count)};
  for (auto& v : p.values) v = std::bit_cast<double>(get_u64(in));
  return p;
}

}  // namespace vecoff::nn
