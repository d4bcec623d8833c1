#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace afkit {

// Small named-array container used for weight checkpoints and state
// snapshots. Everything is little-endian on disk; numeric payloads are
// either f32 (compact weights) or f64 (exact state).
enum class BlockType : std::uint8_t { F32 = 0, F64 = 1 };

struct Block {
  std::string name;
  BlockType type = BlockType::F64;
  std::vector<double> data;
};

struct BlobFile {
  std::uint32_t kind = 0;  // caller-defined file role tag
  std::vector<std::pair<std::string, std::uint32_t>> meta;
  std::vector<Block> blocks;

  const Block& need(const std::string& name) const;
  std::uint32_t meta_value(const std::string& name) const;
};

void write_blob(const std::string& path, const BlobFile& f);
BlobFile read_blob(const std::string& path);

}  // namespace afkit
