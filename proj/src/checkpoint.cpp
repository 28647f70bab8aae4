#include "acevc/nn/checkpoint.hpp"

#include <zlib.h>

#include <algorithm>
#include <fstream>
#include <iterator>

namespace acevc::nn {

namespace {

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    std::uint8_t buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.insert(out.end(), buf, buf + sizeof(T));
  }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > size_) throw Error("checkpoint header runs past end of file", ErrorCode::kFormat);
  }
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::size_t dtype_size(DType d) {
  switch (d) {
    case DType::kF32: return 4;
    case DType::kF64: return 8;
    case DType::kI64: return 8;
    case DType::kU8: return 1;
  }
  throw Error("unknown dtype", ErrorCode::kFormat);
}

}  // namespace

std::uint64_t fingerprint(std::string_view kind, std::string_view config_text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::string_view s) {
    for (char c : s) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
  };
  feed(kind);
  feed("\n");
  feed(config_text);
  return h;
}

void Container::put(TensorEntry entry) {
  for (auto& e : entries_)
    if (e.name == entry.name) {
      e = std::move(entry);
      return;
    }
  entries_.push_back(std::move(entry));
}

const TensorEntry* Container::find(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

const TensorEntry& Container::require(std::string_view name) const {
  const TensorEntry* e = find(name);
  if (!e) throw Error("checkpoint has no entry '" + std::string(name) + "'", ErrorCode::kFormat);
  return *e;
}

void Container::put_text(const std::string& name, std::string_view text) {
  TensorEntry e{name, DType::kU8, {static_cast<std::uint64_t>(text.size())}, {}};
  e.bytes.assign(text.begin(), text.end());
  put(std::move(e));
}

std::string Container::get_text(std::string_view name) const {
  const TensorEntry& e = require(name);
  if (e.dtype != DType::kU8) throw Error("entry '" + std::string(name) + "' is not text", ErrorCode::kFormat);
  return std::string(e.bytes.begin(), e.bytes.end());
}

void Container::put_int(const std::string& name, std::int64_t value) {
  TensorEntry e{name, DType::kI64, {1}, {}};
  e.bytes.resize(8);
  std::memcpy(e.bytes.data(), &value, 8);
  put(std::move(e));
}

std::int64_t Container::get_int(std::string_view name) const {
  const TensorEntry& e = require(name);
  if (e.dtype != DType::kI64 || e.bytes.size() != 8)
    throw Error("entry '" + std::string(name) + "' is not an integer", ErrorCode::kFormat);
  std::int64_t v;
  std::memcpy(&v, e.bytes.data(), 8);
  return v;
}

std::vector<std::uint8_t> Container::serialize() const {
  Writer w;
  w.raw(kContainerMagic, sizeof(kContainerMagic));
  w.pod<std::uint32_t>(version);
  w.pod<std::uint64_t>(config_hash);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(entries_.size()));
  std::uint64_t offset = 0;
  for (const auto& e : entries_) {
    if (e.name.size() > 0xffff) throw Error("entry name too long: " + e.name);
    w.pod<std::uint16_t>(static_cast<std::uint16_t>(e.name.size()));
    w.raw(e.name.data(), e.name.size());
    w.pod<std::uint8_t>(static_cast<std::uint8_t>(e.dtype));
    w.pod<std::uint8_t>(static_cast<std::uint8_t>(e.shape.size()));
    for (auto d : e.shape) w.pod<std::uint64_t>(d);
    w.pod<std::uint64_t>(offset);
    w.pod<std::uint64_t>(e.bytes.size());
    offset += e.bytes.size();
  }
  for (const auto& e : entries_) w.raw(e.bytes.data(), e.bytes.size());
  w.pod<std::uint32_t>(crc_of(w.out.data(), w.out.size()));
  return std::move(w.out);
}

Container Container::deserialize(const std::vector<std::uint8_t>& data) {
  constexpr std::size_t kMinSize = sizeof(kContainerMagic) + 4 + 8 + 4 + 4;
  if (data.size() < sizeof(kContainerMagic) ||
      std::memcmp(data.data(), kContainerMagic, sizeof(kContainerMagic)) != 0)
    throw Error("not an ACEVC1 container (bad magic)", ErrorCode::kFormat);
  if (data.size() < kMinSize) throw Error("checkpoint truncated: checksum missing", ErrorCode::kChecksum);
  const std::size_t body = data.size() - 4;
  std::uint32_t stored;
  std::memcpy(&stored, data.data() + body, 4);
  if (stored != crc_of(data.data(), body))
    throw Error("checkpoint checksum mismatch (corrupt or truncated file)", ErrorCode::kChecksum);

  Reader r(data.data(), body);
  r.str(sizeof(kContainerMagic));
  Container c;
  c.version = r.pod<std::uint32_t>();
  if (c.version != kContainerVersion)
    throw Error("unsupported checkpoint version " + std::to_string(c.version) + " (expected " +
                    std::to_string(kContainerVersion) + ")",
                ErrorCode::kVersion);
  c.config_hash = r.pod<std::uint64_t>();
  const auto count = r.pod<std::uint32_t>();
  struct Slot {
    std::uint64_t offset, nbytes;
  };
  std::vector<Slot> slots;
  for (std::uint32_t i = 0; i < count; ++i) {
    TensorEntry e;
    const auto len = r.pod<std::uint16_t>();
    e.name = r.str(len);
    e.dtype = static_cast<DType>(r.pod<std::uint8_t>());
    const auto ndim = r.pod<std::uint8_t>();
    std::uint64_t elems = 1;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      e.shape.push_back(r.pod<std::uint64_t>());
      elems *= e.shape.back();
    }
    Slot s{r.pod<std::uint64_t>(), r.pod<std::uint64_t>()};
    if (s.nbytes != elems * dtype_size(e.dtype))
      throw Error("entry '" + e.name + "' size does not match its shape", ErrorCode::kFormat);
    slots.push_back(s);
    c.entries_.push_back(std::move(e));
  }
  const std::size_t data_start = r.pos();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto begin = data_start + slots[i].offset;
    if (begin + slots[i].nbytes > body)
      throw Error("entry '" + c.entries_[i].name + "' runs past end of file", ErrorCode::kFormat);
    c.entries_[i].bytes.assign(data.begin() + static_cast<std::ptrdiff_t>(begin),
                               data.begin() + static_cast<std::ptrdiff_t>(begin + slots[i].nbytes));
  }
  return c;
}

void Container::write(const std::string& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing", ErrorCode::kIo);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing '" + path + "'", ErrorCode::kIo);
}

Container Container::read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path + "'", ErrorCode::kIo);
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(data);
}

}  // namespace acevc::nn
