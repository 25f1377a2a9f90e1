#include "wmm/idx.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "wmm/error.hpp"

namespace wmm {

namespace {

constexpr std::size_t kMaxDims = 16;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t at) {
    return (std::uint32_t{bytes[at]} << 24) | (std::uint32_t{bytes[at + 1]} << 16) |
           (std::uint32_t{bytes[at + 2]} << 8) | std::uint32_t{bytes[at + 3]};
}

std::uint64_t read_be(const std::uint8_t* p, std::size_t n) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) {
        v = (v << 8) | p[i];
    }
    return v;
}

bool known_type(std::uint8_t code) {
    switch (code) {
    case 0x08: case 0x09: case 0x0B: case 0x0C: case 0x0D: case 0x0E:
        return true;
    default:
        return false;
    }
}

} // namespace

std::size_t element_size(IdxType type) {
    switch (type) {
    case IdxType::UInt8:
    case IdxType::Int8: return 1;
    case IdxType::Int16: return 2;
    case IdxType::Int32:
    case IdxType::Float32: return 4;
    case IdxType::Float64: return 8;
    }
    throw std::invalid_argument("element_size: unknown IDX type");
}

IdxParseError::IdxParseError(IdxErrorKind kind, std::size_t offset, const std::string& what)
    : std::runtime_error("IDX parse error at byte " + std::to_string(offset) + ": " + what),
      kind_(kind), offset_(offset) {}

IdxTensor::IdxTensor(IdxType type, std::vector<std::uint32_t> dims,
                     std::vector<std::uint8_t> payload)
    : type_(type), dims_(std::move(dims)), count_(1), payload_(std::move(payload)) {
    for (std::uint32_t d : dims_) {
        count_ *= d;
    }
    if (payload_.size() != count_ * element_size(type_)) {
        throw std::invalid_argument("IdxTensor: payload size does not match dimensions");
    }
}

double IdxTensor::value(std::size_t i) const {
    if (i >= count_) {
        throw std::out_of_range("IdxTensor::value: index out of range");
    }
    const std::size_t n = element_size(type_);
    const std::uint64_t raw = read_be(payload_.data() + i * n, n);
    switch (type_) {
    case IdxType::UInt8: return static_cast<double>(static_cast<std::uint8_t>(raw));
    case IdxType::Int8: return static_cast<double>(static_cast<std::int8_t>(raw));
    case IdxType::Int16: return static_cast<double>(static_cast<std::int16_t>(raw));
    case IdxType::Int32: return static_cast<double>(static_cast<std::int32_t>(raw));
    case IdxType::Float32: return static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(raw)));
    case IdxType::Float64: return std::bit_cast<double>(raw);
    }
    return 0.0;
}

IdxTensor parse_idx(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) {
        throw IdxParseError(IdxErrorKind::Truncated, bytes.size(), "header shorter than 4 bytes");
    }
    if (bytes[0] != 0 || bytes[1] != 0) {
        throw IdxParseError(IdxErrorKind::BadMagic, bytes[0] != 0 ? 0 : 1,
                            "magic number must start with two zero bytes");
    }
    if (!known_type(bytes[2])) {
        throw IdxParseError(IdxErrorKind::UnsupportedType, 2,
                            "unsupported element type code " + std::to_string(bytes[2]));
    }
    const auto type = static_cast<IdxType>(bytes[2]);
    const std::size_t ndims = bytes[3];
    if (ndims == 0 || ndims > kMaxDims) {
        throw IdxParseError(IdxErrorKind::BadDimensions, 3,
                            "dimension count " + std::to_string(ndims) + " not in [1, 16]");
    }
    const std::size_t header = 4 + 4 * ndims;
    if (bytes.size() < header) {
        throw IdxParseError(IdxErrorKind::Truncated, bytes.size(), "dimension sizes truncated");
    }

    std::vector<std::uint32_t> dims(ndims);
    const std::size_t elem = element_size(type);
    // Cap the product so that count * elem cannot overflow size_t.
    const std::size_t cap = std::numeric_limits<std::size_t>::max() / elem;
    std::size_t count = 1;
    for (std::size_t d = 0; d < ndims; ++d) {
        dims[d] = read_be32(bytes, 4 + 4 * d);
        if (dims[d] != 0 && count > cap / dims[d]) {
            throw IdxParseError(IdxErrorKind::BadDimensions, 4 + 4 * d,
                                "declared element count overflows");
        }
        count *= dims[d];
    }

    const std::size_t payload_size = count * elem;
    const std::size_t available = bytes.size() - header;
    if (available < payload_size) {
        throw IdxParseError(IdxErrorKind::Truncated, bytes.size(),
                            "payload truncated: expected " + std::to_string(payload_size) +
                                " bytes, found " + std::to_string(available));
    }
    if (available > payload_size) {
        throw IdxParseError(IdxErrorKind::TrailingBytes, header + payload_size,
                            std::to_string(available - payload_size) +
                                " unexpected bytes after payload");
    }
    std::vector<std::uint8_t> payload(bytes.begin() + static_cast<std::ptrdiff_t>(header),
                                      bytes.end());
    return {type, std::move(dims), std::move(payload)};
}

IdxTensor read_idx_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(path.string(), "cannot open IDX file");
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw IoError(path.string(), "read failed");
    }
    return parse_idx(bytes);
}

std::vector<std::uint8_t> encode_idx(const IdxTensor& tensor) {
    std::vector<std::uint8_t> out;
    out.reserve(4 + 4 * tensor.dims().size() + tensor.payload().size());
    out.push_back(0);
    out.push_back(0);
    out.push_back(static_cast<std::uint8_t>(tensor.type()));
    out.push_back(static_cast<std::uint8_t>(tensor.dims().size()));
    for (std::uint32_t d : tensor.dims()) {
        out.push_back(static_cast<std::uint8_t>(d >> 24));
        out.push_back(static_cast<std::uint8_t>(d >> 16));
        out.push_back(static_cast<std::uint8_t>(d >> 8));
        out.push_back(static_cast<std::uint8_t>(d));
    }
    out.insert(out.end(), tensor.payload().begin(), tensor.payload().end());
    return out;
}

} // namespace wmm
