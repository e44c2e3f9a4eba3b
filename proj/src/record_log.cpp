#include "gova/record_log.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>

namespace gova {

namespace {

enum ValueTag : std::uint8_t { kBool = 0, kInt = 1, kDouble = 2, kString = 3 };

constexpr std::uint64_t kHeaderBytes = 8;

std::uint32_t load_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
  return v;
}

}  // namespace

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.append(s);
}

void ByteWriter::value(const Value& v) {
  switch (v.index()) {
    case 0:
      u8(kBool);
      u8(std::get<bool>(v) ? 1 : 0);
      break;
    case 1:
      u8(kInt);
      i64(std::get<std::int64_t>(v));
      break;
    case 2:
      u8(kDouble);
      f64(std::get<double>(v));
      break;
    default:
      u8(kString);
      str(std::get<std::string>(v));
      break;
  }
}

void ByteWriter::kv_map(const KeyValueMap& m) {
  u32(static_cast<std::uint32_t>(m.size()));
  for (const auto& [k, v] : m) {
    str(k);
    value(v);
  }
}

std::string_view ByteReader::take(std::size_t n) {
  if (data_.size() - pos_ < n) throw Error(ErrorCode::CorruptSnapshot, "truncated payload");
  auto out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t ByteReader::u8() { return static_cast<std::uint8_t>(take(1)[0]); }

std::uint32_t ByteReader::u32() { return load_u32(take(4).data()); }

std::uint64_t ByteReader::u64() {
  auto s = take(8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[i]);
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::str() {
  auto n = u32();
  return std::string(take(n));
}

Value ByteReader::value() {
  switch (u8()) {
    case kBool: return Value{u8() != 0};
    case kInt: return Value{i64()};
    case kDouble: return Value{f64()};
    case kString: return Value{str()};
    default: throw Error(ErrorCode::CorruptSnapshot, "bad value tag");
  }
}

KeyValueMap ByteReader::kv_map() {
  KeyValueMap m;
  auto n = u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    auto k = str();
    m.emplace(std::move(k), value());
  }
  return m;
}

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

std::string compress_bytes(std::string_view raw) {
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::string out(8 + bound, '\0');
  // Prefix with the raw size so decompression can size its buffer.
  std::uint64_t n = raw.size();
  for (int i = 0; i < 8; ++i) out[i] = static_cast<char>((n >> (8 * i)) & 0xff);
  int rc = compress2(reinterpret_cast<Bytef*>(out.data() + 8), &bound,
                     reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()),
                     Z_BEST_COMPRESSION);
  if (rc != Z_OK) throw Error(ErrorCode::PersistenceFailure, "compression failed");
  out.resize(8 + bound);
  return out;
}

std::string decompress_bytes(std::string_view packed) {
  if (packed.size() < 8) throw Error(ErrorCode::CorruptSnapshot, "compressed block too short");
  std::uint64_t n = 0;
  for (int i = 7; i >= 0; --i) n = (n << 8) | static_cast<unsigned char>(packed[i]);
  std::string out(n, '\0');
  uLongf len = static_cast<uLongf>(n);
  int rc = uncompress(reinterpret_cast<Bytef*>(out.data()), &len,
                      reinterpret_cast<const Bytef*>(packed.data() + 8),
                      static_cast<uLong>(packed.size() - 8));
  if (rc != Z_OK || len != n) throw Error(ErrorCode::CorruptSnapshot, "decompression failed");
  return out;
}

RecordLog::RecordLog(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(*path_)) {
    size_ = std::filesystem::file_size(*path_);
    // Count intact records; a torn tail is left in place and ignored.
    std::uint64_t off = 0;
    while (off + kHeaderBytes <= size_) {
      auto header = read_range(off, kHeaderBytes);
      std::uint64_t len = load_u32(header.data());
      if (off + kHeaderBytes + len > size_) break;
      ++records_;
      off += kHeaderBytes + len;
    }
    size_ = off;
  } else {
    std::ofstream create(*path_, std::ios::binary);
    if (!create) throw Error(ErrorCode::PersistenceFailure, "cannot create " + path_->string());
  }
}

std::uint64_t RecordLog::append(std::string_view payload) {
  if (fail_ && fail_(payload)) throw Error(ErrorCode::PersistenceFailure, "injected write failure");
  ByteWriter header;
  header.u32(static_cast<std::uint32_t>(payload.size()));
  header.u32(crc32_of(payload));
  const std::uint64_t offset = size_;
  if (path_) {
    std::fstream out(*path_, std::ios::binary | std::ios::in | std::ios::out);
    if (!out) throw Error(ErrorCode::PersistenceFailure, "cannot open " + path_->string());
    out.seekp(static_cast<std::streamoff>(offset));
    out.write(header.bytes().data(), static_cast<std::streamsize>(header.bytes().size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::PersistenceFailure, "write failed on " + path_->string());
  } else {
    memory_.append(header.bytes());
    memory_.append(payload);
  }
  size_ += kHeaderBytes + payload.size();
  ++records_;
  return offset;
}

std::string RecordLog::read_range(std::uint64_t offset, std::uint64_t len) const {
  if (offset + len > size_) {
    throw Error(ErrorCode::CorruptSnapshot, "record out of range");
  }
  if (!path_) return memory_.substr(offset, len);
  std::ifstream in(*path_, std::ios::binary);
  if (!in) throw Error(ErrorCode::PersistenceFailure, "cannot read " + path_->string());
  std::string out(len, '\0');
  in.seekg(static_cast<std::streamoff>(offset));
  in.read(out.data(), static_cast<std::streamsize>(len));
  if (static_cast<std::uint64_t>(in.gcount()) != len) {
    throw Error(ErrorCode::CorruptSnapshot, "short read");
  }
  return out;
}

std::string RecordLog::read(std::uint64_t offset) const {
  if (offset + kHeaderBytes > size_) throw Error(ErrorCode::CorruptSnapshot, "bad record offset");
  auto header = read_range(offset, kHeaderBytes);
  std::uint64_t len = load_u32(header.data());
  std::uint32_t sum = load_u32(header.data() + 4);
  if (offset + kHeaderBytes + len > size_) throw Error(ErrorCode::CorruptSnapshot, "record length overruns log");
  auto payload = read_range(offset + kHeaderBytes, len);
  if (crc32_of(payload) != sum) throw Error(ErrorCode::CorruptSnapshot, "checksum mismatch");
  return payload;
}

std::vector<std::pair<std::uint64_t, std::string>> RecordLog::scan() const {
  std::vector<std::pair<std::uint64_t, std::string>> out;
  out.reserve(records_);
  std::uint64_t off = 0;
  while (off < size_) {
    auto payload = read(off);
    auto next = off + kHeaderBytes + payload.size();
    out.emplace_back(off, std::move(payload));
    off = next;
  }
  return out;
}

void RecordLog::flip_byte(std::uint64_t offset) {
  if (offset >= size_) return;
  if (!path_) {
    memory_[offset] = static_cast<char>(memory_[offset] ^ 0x5a);
    return;
  }
  std::fstream f(*path_, std::ios::binary | std::ios::in | std::ios::out);
  f.seekg(static_cast<std::streamoff>(offset));
  char c = 0;
  f.get(c);
  f.seekp(static_cast<std::streamoff>(offset));
  f.put(static_cast<char>(c ^ 0x5a));
}

}  // namespace gova
