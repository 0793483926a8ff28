#include "ade/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "ade/errors.hpp"

namespace ade {

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw DataError("cannot open checkpoint: " + path);
  }

  void read(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) {
      throw DataError("truncated checkpoint at offset " + std::to_string(offset_) +
                      ": " + path_);
    }
    offset_ += n;
  }

  std::uint64_t u64() {
    unsigned char b[8];
    read(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }

  float f32() {
    unsigned char b[4];
    read(b, 4);
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  std::uint64_t offset() const { return offset_; }

 private:
  std::ifstream in_;
  std::string path_;
  std::uint64_t offset_ = 0;
};

}  // namespace

void save_checkpoint(const ParameterStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  put_u64(out, kCheckpointVersion);
  put_u64(out, store.count());
  for (const auto& [name, p] : store) {
    put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(out, p.value.rank());
    for (std::size_t d : p.value.shape()) put_u64(out, d);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      put_f32(out, static_cast<float>(p.value[i]));
    }
  }
  out.flush();
  if (!out) throw DataError("write failed for checkpoint: " + path);
}

ParameterStore load_checkpoint(const std::string& path) {
  Reader r(path);
  const std::uint64_t version = r.u64();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version) +
                    " (expected " + std::to_string(kCheckpointVersion) + "): " + path);
  }
  const std::uint64_t count = r.u64();
  ParameterStore store;
  for (std::uint64_t t = 0; t < count; ++t) {
    const std::uint64_t name_len = r.u64();
    if (name_len > (1u << 20)) {
      throw DataError("implausible name length at offset " +
                      std::to_string(r.offset() - 8) + ": " + path);
    }
    std::string name(name_len, '\0');
    if (name_len) r.read(name.data(), name_len);
    const std::uint64_t rank = r.u64();
    if (rank == 0 || rank > 8) {
      throw DataError("implausible tensor rank at offset " +
                      std::to_string(r.offset() - 8) + ": " + path);
    }
    Shape shape(rank);
    std::size_t size = 1;
    for (std::uint64_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<std::size_t>(r.u64());
      size *= shape[d];
    }
    std::vector<double> values(size);
    for (std::size_t i = 0; i < size; ++i) values[i] = static_cast<double>(r.f32());
    store.create(name, Tensor::from(std::move(shape), std::move(values)));
  }
  return store;
}

}  // namespace ade
