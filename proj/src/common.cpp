#include "devfp/error.hpp"
#include "devfp/net_types.hpp"

#include <charconv>
#include <cstdio>

namespace devfp {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::UnknownMagic: return "UnknownMagic";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::UnsupportedLinkType: return "UnsupportedLinkType";
    case ErrorCode::TruncatedHeader: return "TruncatedHeader";
    case ErrorCode::CorruptFrame: return "CorruptFrame";
    case ErrorCode::EmptyRegistry: return "EmptyRegistry";
    case ErrorCode::InvalidRegistry: return "InvalidRegistry";
    case ErrorCode::HeaderMismatch: return "HeaderMismatch";
    case ErrorCode::RaggedRow: return "RaggedRow";
    case ErrorCode::NonNumericCell: return "NonNumericCell";
    case ErrorCode::InvalidLabel: return "InvalidLabel";
    case ErrorCode::AllZeroCounts: return "AllZeroCounts";
    case ErrorCode::SingleClassDataset: return "SingleClassDataset";
    case ErrorCode::MissingMeta: return "MissingMeta";
    case ErrorCode::InvalidMeta: return "InvalidMeta";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::InvalidHyperparams: return "InvalidHyperparams";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::UnlabeledRow: return "UnlabeledRow";
    case ErrorCode::ModelFormat: return "ModelFormat";
    case ErrorCode::ModelVersion: return "ModelVersion";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::UnknownClass: return "UnknownClass";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

std::string MacAddress::to_string() const
{
    char buf[18];
    std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", octets[0], octets[1],
                  octets[2], octets[3], octets[4], octets[5]);
    return buf;
}

std::optional<MacAddress> MacAddress::parse(std::string_view text)
{
    if (text.size() != 17)
        return std::nullopt;
    MacAddress mac;
    for (std::size_t i = 0; i < 6; ++i) {
        const auto part = text.substr(i * 3, 2);
        if (i < 5 && text[i * 3 + 2] != ':')
            return std::nullopt;
        unsigned value = 0;
        auto [ptr, ec] = std::from_chars(part.data(), part.data() + 2, value, 16);
        if (ec != std::errc{} || ptr != part.data() + 2)
            return std::nullopt;
        mac.octets[i] = static_cast<std::uint8_t>(value);
    }
    return mac;
}

std::string Ipv4Address::to_string() const
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", (value >> 24) & 0xff, (value >> 16) & 0xff,
                  (value >> 8) & 0xff, value & 0xff);
    return buf;
}

std::optional<Ipv4Address> Ipv4Address::parse(std::string_view text)
{
    std::uint32_t result = 0;
    const char* p = text.data();
    const char* end = text.data() + text.size();
    for (int i = 0; i < 4; ++i) {
        unsigned octet = 0;
        auto [ptr, ec] = std::from_chars(p, end, octet);
        if (ec != std::errc{} || octet > 255)
            return std::nullopt;
        result = (result << 8) | octet;
        p = ptr;
        if (i < 3) {
            if (p == end || *p != '.')
                return std::nullopt;
            ++p;
        }
    }
    if (p != end)
        return std::nullopt;
    return Ipv4Address{result};
}

} // namespace devfp
