#pragma once

// Classic libpcap file reader/writer and Ethernet II / IPv4 / TCP / UDP decoding.

#include "devfp/net_types.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace devfp::capture {

inline constexpr std::uint32_t kMagicMicro = 0xa1b2c3d4;
inline constexpr std::uint32_t kMagicMicroSwapped = 0xd4c3b2a1;
inline constexpr std::uint32_t kMagicNano = 0xa1b23c4d;
inline constexpr std::uint32_t kMagicNanoSwapped = 0x4d3cb2a1;
inline constexpr std::uint32_t kPcapngMagic = 0x0a0d0d0a;
inline constexpr std::uint32_t kLinkTypeEthernet = 1;
inline constexpr std::size_t kGlobalHeaderSize = 24;
inline constexpr std::size_t kFrameHeaderSize = 16;

enum class ByteOrder { native, swapped };
enum class TsResolution { micro, nano };

struct RawFrame {
    std::uint32_t ts_sec = 0;
    std::uint32_t ts_frac = 0;
    std::uint32_t original_len = 0;
    std::vector<std::uint8_t> payload;

    std::uint32_t captured_len() const { return static_cast<std::uint32_t>(payload.size()); }
    bool operator==(const RawFrame&) const = default;
};

/// Set when the file ends in the middle of a frame; frames before it are kept.
struct Truncation {
    std::size_t frame_index = 0;
    bool operator==(const Truncation&) const = default;
};

struct CaptureFile {
    // native: header fields stored little-endian (magic bytes d4 c3 b2 a1 on disk).
    ByteOrder byte_order = ByteOrder::native;
    TsResolution ts_resolution = TsResolution::micro;
    std::uint16_t version_major = 2;
    std::uint16_t version_minor = 4;
    std::int32_t thiszone = 0;
    std::uint32_t sigfigs = 0;
    std::uint32_t snaplen = 65535;
    std::uint32_t link_type = kLinkTypeEthernet;
    std::vector<RawFrame> frames;
    std::optional<Truncation> truncation;
};

/// Throws Error{UnknownMagic | UnsupportedFormat | UnsupportedLinkType | TruncatedHeader | CorruptFrame}.
CaptureFile parse_capture(std::span<const std::uint8_t> bytes);
CaptureFile read_capture_file(const std::filesystem::path& path);

/// Frame-at-a-time reader for captures too large to hold in memory. Reports the same
/// errors as parse_capture; a frame cut off by end of input ends the stream and sets truncation().
class CaptureStream {
public:
    /// Reads and validates the global header.
    explicit CaptureStream(std::istream& in);

    /// Capture metadata; `frames` stays empty.
    const CaptureFile& header() const { return header_; }
    bool next(RawFrame& frame);
    const std::optional<Truncation>& truncation() const { return truncation_; }

private:
    std::istream& in_;
    CaptureFile header_;
    std::optional<Truncation> truncation_;
    std::size_t index_ = 0;
    bool done_ = false;
};

/// Serialises in the file's recorded byte order and timestamp resolution.
std::vector<std::uint8_t> write_capture(const CaptureFile& capture);
void write_capture_file(const CaptureFile& capture, const std::filesystem::path& path);

struct TcpHeader {
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    std::uint32_t seq_raw = 0;
    std::uint32_t ack_raw = 0;
    std::uint16_t flags = 0; // low 9 bits of offset/flags word
    std::uint16_t window_raw = 0;
    std::optional<std::uint8_t> window_scale_option;

    static constexpr std::uint16_t kFin = 0x01;
    static constexpr std::uint16_t kSyn = 0x02;
    static constexpr std::uint16_t kRst = 0x04;
    static constexpr std::uint16_t kPsh = 0x08;
    static constexpr std::uint16_t kAck = 0x10;

    bool has(std::uint16_t flag) const { return (flags & flag) != 0; }
    bool operator==(const TcpHeader&) const = default;
};

struct UdpHeader {
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    std::uint16_t length = 0;
    bool operator==(const UdpHeader&) const = default;
};

using Transport = std::variant<std::monostate, TcpHeader, UdpHeader>;

struct PacketRecord {
    MacAddress src_mac;
    MacAddress dst_mac;
    std::uint16_t ip_len = 0;
    std::uint8_t ip_ttl = 0;
    std::uint8_t ip_proto = 0;
    Ipv4Address src_ip;
    Ipv4Address dst_ip;
    Transport transport;

    const TcpHeader* tcp() const { return std::get_if<TcpHeader>(&transport); }
    const UdpHeader* udp() const { return std::get_if<UdpHeader>(&transport); }
    bool operator==(const PacketRecord&) const = default;
};

enum class SkipReason {
    NotIpv4,        // ARP, IPv6, other ethertypes
    MalformedIpv4,  // bad version/IHL/total length
    Fragment,       // non-first IPv4 fragment of TCP/UDP: no transport header
};

struct Skip {
    SkipReason reason;
};

enum class TruncatedLayer { link, ip, transport };

/// The captured bytes stop before the end of a header that was needed.
struct TruncatedFrame {
    TruncatedLayer layer;
};

using DecodeResult = std::variant<PacketRecord, Skip, TruncatedFrame>;

/// Never reads beyond frame.payload; throws Error{UnsupportedLinkType} unless link_type == 1.
DecodeResult decode_frame(const RawFrame& frame, std::uint32_t link_type = kLinkTypeEthernet);

} // namespace devfp::capture
