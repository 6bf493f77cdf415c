#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vecoff::nn {

struct ParamBlock {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 1;
  std::size_t offset = 0;
  bool bias = false;  // zero-initialized
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;

  std::size_t size() const { return rows * cols; }
};

// Ordered list of named parameter blocks laid out back to back in a flat
// vector. Registration order is the wire order used by federation and
// checkpoints; changing it changes the manifest hash.
class ParamRegistry {
public:
  std::size_t add(std::string name, std::size_t rows, std::size_t cols, bool bias,
                  std::size_t fan_in, std::size_t fan_out);

  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  const ParamBlock& block(std::size_t i) const { return blocks_.at(i); }
  std::size_t find(const std::string& name) const;
  std::size_t total_size() const { return total_; }

  // One "name rows cols" line per block.
  std::string manifest() const;
  std::uint64_t manifest_hash() const;

  bool operator==(const ParamRegistry& o) const { return manifest() == o.manifest(); }

private:
  std::vector<ParamBlock> blocks_;
  std::size_t total_ = 0;
};

struct ParamVector {
  ParamRegistry registry;
  std::vector<double> values;

  std::span<double> block(std::size_t i) {
    const auto& b = registry.block(i);
    return std::span<double>(values).subspan(b.offset, b.size());
  }
  std::span<const double> block(std::size_t i) const {
    const auto& b = registry.block(i);
    return std::span<const double>(values).subspan(b.offset, b.size());
  }
};

// Xavier-uniform weights with scale sqrt(6 / (fan_in + fan_out)); biases zero.
ParamVector init_params(const ParamRegistry& registry, std::uint64_t seed);

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t fnv1a64(std::span<const double> values);

// Binary block: magic, manifest, manifest hash, count, little-endian doubles.
void write_params(std::ostream& out, const ParamVector& params);
// Throws InputError if the stored manifest hash does not match `expected`.
ParamVector read_params(std::istream& in, const ParamRegistry& expected);

}  // namespace vecoff::nn
