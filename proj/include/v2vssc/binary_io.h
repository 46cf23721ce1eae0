#ifndef V2VSSC_BINARY_IO_H_
#define V2VSSC_BINARY_IO_H_

#include <bit>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace v2vssc {

static_assert(std::endian::native == std::endian::little,
              "wire formats assume a little-endian host");

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  enum class Kind { kBadMagic, kVersionMismatch, kTruncated, kInvalidValue };

  ParseError(Kind kind, std::size_t offset, const std::string& what)
      : std::runtime_error(what + " at offset " + std::to_string(offset)),
        kind_(kind),
        offset_(offset) {}

  Kind kind() const { return kind_; }
  std::size_t offset() const { return offset_; }

 private:
  Kind kind_;
  std::size_t offset_;
};

class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::uint8_t>* out) : out_(out) {}

  template <class T>
  void Put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out_->insert(out_->end(), p, p + sizeof(T));
  }
  void PutBytes(std::string_view s) { out_->insert(out_->end(), s.begin(), s.end()); }
  void PutZeros(std::size_t n) { out_->insert(out_->end(), n, 0); }
  std::size_t size() const { return out_->size(); }

 private:
  std::vector<std::uint8_t>* out_;
};

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size)
      : data_(data), size_(size) {}
  explicit ByteReader(const std::vector<std::uint8_t>& v)
      : ByteReader(v.data(), v.size()) {}

  template <class T>
  T Get(const char* field) {
    Need(sizeof(T), field);
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  void ExpectMagic(std::string_view magic) {
    Need(magic.size(), "magic");
    if (std::memcmp(data_ + pos_, magic.data(), magic.size()) != 0) {
      throw ParseError(ParseError::Kind::kBadMagic, pos_,
                       "bad magic, expected \"" + std::string(magic) + "\"");
    }
    pos_ += magic.size();
  }

  void ExpectVersion(std::uint16_t expected) {
    const std::size_t at = pos_;
    const auto v = Get<std::uint16_t>("version");
    if (v != expected) {
      throw ParseError(ParseError::Kind::kVersionMismatch, at,
                       "unsupported version " + std::to_string(v));
    }
  }

  std::string GetCString(const char* field) {
    std::string s;
    while (true) {
      const char c = static_cast<char>(Get<std::uint8_t>(field));
      if (c == '\0') return s;
      s.push_back(c);
    }
  }

  void Skip(std::size_t n, const char* field) {
    Need(n, field);
    pos_ += n;
  }

  void Need(std::size_t n, const char* field) const {
    if (size_ - pos_ < n) {
      throw ParseError(ParseError::Kind::kTruncated, pos_,
                       std::string("truncated while reading ") + field);
    }
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return size_ - pos_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> ReadFileBytes(const std::string& path);
void WriteFileBytes(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace v2vssc

#endif  // V2VSSC_BINARY_IO_H_
