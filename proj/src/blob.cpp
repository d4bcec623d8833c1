#include "afkit/blob.hpp"

#include <cstdio>
#include <cstring>

#include "afkit/common.hpp"

namespace afkit {
namespace {

constexpr std::uint32_t kMagic = 0x30425641u;  // "AVB0"

void put_bytes(std::vector<unsigned char>& out, const void* p, std::size_t n) {
  const auto* b = static_cast<const unsigned char*>(p);
  out.insert(out.end(), b, b + n);
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

void put_f32(std::vector<unsigned char>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

void put_f64(std::vector<unsigned char>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

void put_name(std::vector<unsigned char>& out, const std::string& s) {
  if (s.empty() || s.size() > 255) throw ConfigError("blob name must be 1..255 bytes");
  out.push_back(static_cast<unsigned char>(s.size()));
  put_bytes(out, s.data(), s.size());
}

struct Reader {
  const unsigned char* p;
  std::size_t left;
  void take(void* dst, std::size_t n) {
    if (n > left) throw IoError("blob file truncated");
    std::memcpy(dst, p, n);
    p += n;
    left -= n;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    take(b, 4);
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
           std::uint32_t(b[3]) << 24;
  }
  std::uint64_t u64() {
    std::uint64_t v = u32();
    return v | std::uint64_t(u32()) << 32;
  }
  std::string name() {
    unsigned char n;
    take(&n, 1);
    std::string s(n, '\0');
    take(s.data(), n);
    return s;
  }
};

}  // namespace

const Block& BlobFile::need(const std::string& name) const {
  for (const auto& b : blocks)
    if (b.name == name) return b;
  throw IoError("blob missing block: " + name);
}

std::uint32_t BlobFile::meta_value(const std::string& name) const {
  for (const auto& m : meta)
    if (m.first == name) return m.second;
  throw IoError("blob missing meta: " + name);
}

void write_blob(const std::string& path, const BlobFile& f) {
  std::vector<unsigned char> out;
  put_u32(out, kMagic);
  put_u32(out, f.kind);
  put_u32(out, static_cast<std::uint32_t>(f.meta.size()));
  for (const auto& m : f.meta) {
    put_name(out, m.first);
    put_u32(out, m.second);
  }
  put_u32(out, static_cast<std::uint32_t>(f.blocks.size()));
  for (const auto& b : f.blocks) {
    put_name(out, b.name);
    out.push_back(static_cast<unsigned char>(b.type));
    put_u64(out, b.data.size());
    if (b.type == BlockType::F32)
      for (double v : b.data) put_f32(out, static_cast<float>(v));
    else
      for (double v : b.data) put_f64(out, v);
  }
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw IoError("cannot write " + path);
  const std::size_t n = std::fwrite(out.data(), 1, out.size(), fp);
  std::fclose(fp);
  if (n != out.size()) throw IoError("short write to " + path);
}

BlobFile read_blob(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw IoError("cannot read " + path);
  std::fseek(fp, 0, SEEK_END);
  const long sz = std::ftell(fp);
  std::fseek(fp, 0, SEEK_SET);
  std::vector<unsigned char> raw(sz > 0 ? std::size_t(sz) : 0);
  if (!raw.empty() && std::fread(raw.data(), 1, raw.size(), fp) != raw.size()) {
    std::fclose(fp);
    throw IoError("short read from " + path);
  }
  std::fclose(fp);

  Reader r{raw.data(), raw.size()};
  if (r.u32() != kMagic) throw IoError(path + " is not a blob file");
  BlobFile f;
  f.kind = r.u32();
  const std::uint32_t nmeta = r.u32();
  if (nmeta > 1024) throw IoError("blob meta count implausible");
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    std::string n = r.name();
    f.meta.emplace_back(std::move(n), r.u32());
  }
  const std::uint32_t nblocks = r.u32();
  if (nblocks > 4096) throw IoError("blob block count implausible");
  for (std::uint32_t i = 0; i < nblocks; ++i) {
    Block b;
    b.name = r.name();
    unsigned char t;
    r.take(&t, 1);
    if (t > 1) throw IoError("blob has unknown payload type");
    b.type = static_cast<BlockType>(t);
    const std::uint64_t count = r.u64();
    if (count > (1ull << 32)) throw IoError("blob block size implausible");
    b.data.resize(count);
    if (b.type == BlockType::F32)
      for (auto& v : b.data) {
        std::uint32_t bits = r.u32();
        float fv;
        std::memcpy(&fv, &bits, 4);
        v = fv;
      }
    else
      for (auto& v : b.data) {
        std::uint64_t bits = r.u64();
        std::memcpy(&v, &bits, 8);
      }
    f.blocks.push_back(std::move(b));
  }
  if (r.left != 0) throw IoError(path + " has trailing bytes");
  return f;
}

}  // namespace afkit
