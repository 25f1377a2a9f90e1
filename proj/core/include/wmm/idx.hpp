#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wmm {

enum class IdxType : std::uint8_t {
    UInt8 = 0x08,
    Int8 = 0x09,
    Int16 = 0x0B,
    Int32 = 0x0C,
    Float32 = 0x0D,
    Float64 = 0x0E,
};

std::size_t element_size(IdxType type);

enum class IdxErrorKind { BadMagic, UnsupportedType, BadDimensions, Truncated, TrailingBytes };

class IdxParseError : public std::runtime_error {
public:
    IdxParseError(IdxErrorKind kind, std::size_t offset, const std::string& what);

    IdxErrorKind kind() const noexcept { return kind_; }
    /// Byte offset where parsing failed. For truncation this is the offset
    /// of the first missing byte.
    std::size_t offset() const noexcept { return offset_; }

private:
    IdxErrorKind kind_;
    std::size_t offset_;
};

/// Decoded IDX tensor. The payload is kept in its on-disk big-endian form and
/// decoded per element, so the declared element type is preserved exactly.
class IdxTensor {
public:
    IdxTensor(IdxType type, std::vector<std::uint32_t> dims, std::vector<std::uint8_t> payload);

    IdxType type() const noexcept { return type_; }
    const std::vector<std::uint32_t>& dims() const noexcept { return dims_; }
    std::size_t element_count() const noexcept { return count_; }
    std::span<const std::uint8_t> payload() const noexcept { return payload_; }

    double value(std::size_t i) const;

private:
    IdxType type_;
    std::vector<std::uint32_t> dims_;
    std::size_t count_;
    std::vector<std::uint8_t> payload_;
};

/// Parses a complete IDX stream: two zero bytes, type code, dimension count,
/// big-endian u32 dimension sizes, payload. The payload length must match
/// the header exactly. Never reads past the end of `bytes`.
IdxTensor parse_idx(std::span<const std::uint8_t> bytes);

IdxTensor read_idx_file(const std::filesystem::path& path);

/// Serializes a tensor back to IDX bytes.
std::vector<std::uint8_t> encode_idx(const IdxTensor& tensor);

} // namespace wmm
