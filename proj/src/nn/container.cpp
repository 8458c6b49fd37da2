#include "dehaze/nn/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dehaze/errors.hpp"

namespace dhz::nn {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  float f32() { return std::bit_cast<float>(u32()); }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IoError("truncated tensor container");
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_container(const std::vector<TensorRecord>& records) {
  std::vector<std::uint8_t> out(std::begin(kContainerMagic), std::end(kContainerMagic));
  put_u32(out, kContainerVersion);
  put_u32(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    std::size_t expected = 1;
    for (auto d : r.dims) expected *= d;
    if (expected != r.data.size()) {
      throw std::invalid_argument("record '" + r.name + "' payload does not match its dims");
    }
    put_u32(out, static_cast<std::uint32_t>(r.name.size()));
    out.insert(out.end(), r.name.begin(), r.name.end());
    put_u32(out, static_cast<std::uint32_t>(r.dims.size()));
    for (auto d : r.dims) put_u32(out, d);
    for (float f : r.data) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

std::vector<TensorRecord> decode_container(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes);
  if (in.string(4) != std::string(kContainerMagic, 4)) throw IoError("bad container magic");
  const auto version = in.u32();
  if (version != kContainerVersion) {
    throw IoError("unsupported container version " + std::to_string(version));
  }
  const auto count = in.u32();
  std::vector<TensorRecord> records;
  records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    TensorRecord r;
    r.name = in.string(in.u32());
    const auto ndims = in.u32();
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < ndims; ++d) {
      r.dims.push_back(in.u32());
      n *= r.dims.back();
    }
    if (n * 4 > in.remaining()) throw IoError("truncated tensor container");
    r.data.resize(n);
    for (auto& f : r.data) f = in.f32();
    records.push_back(std::move(r));
  }
  if (!in.done()) throw IoError("trailing bytes after tensor container");
  return records;
}

void write_container(const std::filesystem::path& path, const std::vector<TensorRecord>& records) {
  const auto bytes = encode_container(records);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<TensorRecord> read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_container(bytes);
}

const TensorRecord& find_record(const std::vector<TensorRecord>& records, const std::string& name) {
  for (const auto& r : records) {
    if (r.name == name) return r;
  }
  throw IoError("missing record '" + name + "'");
}

}  // namespace dhz::nn
