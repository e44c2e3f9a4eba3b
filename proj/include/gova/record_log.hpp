#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gova/types.hpp"

namespace gova {

// Little-endian binary encoder used for snapshot and log payloads.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v);
  void str(std::string_view s);
  void value(const Value& v);
  void kv_map(const KeyValueMap& m);
  void actor(const ActorId& id) {
    str(id.kind);
    str(id.local_id);
  }

  [[nodiscard]] const std::string& bytes() const& { return buf_; }
  [[nodiscard]] std::string bytes() && { return std::move(buf_); }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}
  // Takes ownership of a temporary buffer.
  explicit ByteReader(std::string&& data) : owned_(std::move(data)), data_(owned_) {}

  ByteReader(const ByteReader&) = delete;
  ByteReader& operator=(const ByteReader&) = delete;

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64();
  std::string str();
  Value value();
  KeyValueMap kv_map();
  ActorId actor() {
    auto kind = str();
    auto local = str();
    return ActorId{std::move(kind), std::move(local)};
  }

  [[nodiscard]] bool done() const { return pos_ == data_.size(); }

 private:
  std::string_view take(std::size_t n);

  std::string owned_;
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::string_view bytes);
std::string compress_bytes(std::string_view raw);
std::string decompress_bytes(std::string_view packed);

// Append-only file of `[u32 length][u32 checksum][payload]` records,
// little-endian, checksum = CRC-32 of the payload. Offsets returned by
// append() address the record header.
class RecordLog {
 public:
  // In-memory log.
  RecordLog() = default;
  // File-backed log. Existing records in the file are kept and readable.
  explicit RecordLog(std::filesystem::path path);

  RecordLog(const RecordLog&) = delete;
  RecordLog& operator=(const RecordLog&) = delete;
  RecordLog(RecordLog&&) = default;
  RecordLog& operator=(RecordLog&&) = default;

  std::uint64_t append(std::string_view payload);

  // Throws CorruptSnapshot on checksum or framing mismatch.
  [[nodiscard]] std::string read(std::uint64_t offset) const;

  // All records in file order; throws CorruptSnapshot on the first bad record.
  [[nodiscard]] std::vector<std::pair<std::uint64_t, std::string>> scan() const;

  [[nodiscard]] std::size_t record_count() const { return records_; }
  [[nodiscard]] std::uint64_t size_bytes() const { return size_; }
  [[nodiscard]] const std::optional<std::filesystem::path>& path() const { return path_; }

  // Test hooks.
  void flip_byte(std::uint64_t offset);
  void set_failure_injector(std::function<bool(std::string_view payload)> fail) {
    fail_ = std::move(fail);
  }

 private:
  [[nodiscard]] std::string read_range(std::uint64_t offset, std::uint64_t len) const;

  std::optional<std::filesystem::path> path_;
  std::string memory_;
  std::uint64_t size_ = 0;
  std::size_t records_ = 0;
  std::function<bool(std::string_view)> fail_;
};

}  // namespace gova
