#include "devfp/capture.hpp"

#include "devfp/error.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <istream>
#include <iterator>

namespace devfp::capture {

namespace {

class Reader {
public:
    Reader(std::span<const std::uint8_t> bytes, ByteOrder order) : bytes_(bytes), order_(order) {}

    std::uint16_t u16(std::size_t at) const
    {
        const std::uint16_t b0 = bytes_[at], b1 = bytes_[at + 1];
        return order_ == ByteOrder::native ? static_cast<std::uint16_t>(b0 | (b1 << 8))
                                           : static_cast<std::uint16_t>((b0 << 8) | b1);
    }

    std::uint32_t u32(std::size_t at) const
    {
        const std::uint32_t b0 = bytes_[at], b1 = bytes_[at + 1], b2 = bytes_[at + 2],
                            b3 = bytes_[at + 3];
        return order_ == ByteOrder::native ? (b0 | (b1 << 8) | (b2 << 16) | (b3 << 24))
                                           : ((b0 << 24) | (b1 << 16) | (b2 << 8) | b3);
    }

private:
    std::span<const std::uint8_t> bytes_;
    ByteOrder order_;
};

void put16(std::vector<std::uint8_t>& out, std::uint16_t v, ByteOrder order)
{
    if (order == ByteOrder::native) {
        out.push_back(static_cast<std::uint8_t>(v));
        out.push_back(static_cast<std::uint8_t>(v >> 8));
    } else {
        out.push_back(static_cast<std::uint8_t>(v >> 8));
        out.push_back(static_cast<std::uint8_t>(v));
    }
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v, ByteOrder order)
{
    if (order == ByteOrder::native) {
        for (int shift = 0; shift < 32; shift += 8)
            out.push_back(static_cast<std::uint8_t>(v >> shift));
    } else {
        for (int shift = 24; shift >= 0; shift -= 8)
            out.push_back(static_cast<std::uint8_t>(v >> shift));
    }
}

// Network byte order helpers for packet headers.
std::uint16_t be16(std::span<const std::uint8_t> b, std::size_t at)
{
    return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t at)
{
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
           (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

constexpr std::uint16_t kEthertypeIpv4 = 0x0800;
constexpr std::uint16_t kEthertypeVlan = 0x8100;
constexpr std::size_t kEthernetHeader = 14;
constexpr std::size_t kVlanTag = 4;
constexpr std::uint8_t kProtoTcp = 6;
constexpr std::uint8_t kProtoUdp = 17;
constexpr std::uint8_t kTcpOptEnd = 0;
constexpr std::uint8_t kTcpOptNop = 1;
constexpr std::uint8_t kTcpOptWindowScale = 3;

std::optional<std::uint8_t> find_window_scale(std::span<const std::uint8_t> options)
{
    std::size_t i = 0;
    while (i < options.size()) {
        const std::uint8_t kind = options[i];
        if (kind == kTcpOptEnd)
            break;
        if (kind == kTcpOptNop) {
            ++i;
            continue;
        }
        if (i + 1 >= options.size())
            break;
        const std::uint8_t len = options[i + 1];
        if (len < 2 || i + len > options.size())
            break;
        if (kind == kTcpOptWindowScale && len == 3)
            return options[i + 2];
        i += len;
    }
    return std::nullopt;
}

} // namespace

namespace {

// Metadata from the 24-byte global header; `bytes` may be shorter (error).
CaptureFile parse_global_header(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 4)
        throw Error(ErrorCode::TruncatedHeader, "file shorter than the pcap magic number");

    const std::uint32_t magic_le = Reader(bytes, ByteOrder::native).u32(0);
    CaptureFile capture;
    switch (magic_le) {
    case kMagicMicro:
        capture.byte_order = ByteOrder::native;
        capture.ts_resolution = TsResolution::micro;
        break;
    case kMagicMicroSwapped:
        capture.byte_order = ByteOrder::swapped;
        capture.ts_resolution = TsResolution::micro;
        break;
    case kMagicNano:
        capture.byte_order = ByteOrder::native;
        capture.ts_resolution = TsResolution::nano;
        break;
    case kMagicNanoSwapped:
        capture.byte_order = ByteOrder::swapped;
        capture.ts_resolution = TsResolution::nano;
        break;
    case kPcapngMagic:
        throw Error(ErrorCode::UnsupportedFormat,
                    "pcapng capture; only classic pcap is supported (convert with editcap -F pcap)");
    default: {
        char buf[64];
        std::snprintf(buf, sizeof buf, "unrecognised pcap magic 0x%08x", magic_le);
        throw Error(ErrorCode::UnknownMagic, buf);
    }
    }

    if (bytes.size() < kGlobalHeaderSize)
        throw Error(ErrorCode::TruncatedHeader, "pcap global header is shorter than 24 bytes");

    const Reader header(bytes, capture.byte_order);
    capture.version_major = header.u16(4);
    capture.version_minor = header.u16(6);
    capture.thiszone = static_cast<std::int32_t>(header.u32(8));
    capture.sigfigs = header.u32(12);
    capture.snaplen = header.u32(16);
    capture.link_type = header.u32(20);
    if (capture.link_type != kLinkTypeEthernet)
        throw Error(ErrorCode::UnsupportedLinkType,
                    "link type " + std::to_string(capture.link_type) + " (only Ethernet = 1)");
    return capture;
}

struct FrameHeader {
    std::uint32_t ts_sec, ts_frac, incl_len, orig_len;
};

FrameHeader parse_frame_header(std::span<const std::uint8_t> bytes, ByteOrder order, std::size_t index)
{
    const Reader r(bytes, order);
    const FrameHeader h{r.u32(0), r.u32(4), r.u32(8), r.u32(12)};
    if (h.incl_len > h.orig_len)
        throw Error(ErrorCode::CorruptFrame, "frame " + std::to_string(index) + ": captured length " +
                                                 std::to_string(h.incl_len) + " exceeds original length " +
                                                 std::to_string(h.orig_len));
    return h;
}

} // namespace

CaptureFile parse_capture(std::span<const std::uint8_t> bytes)
{
    CaptureFile capture = parse_global_header(bytes);
    std::size_t offset = kGlobalHeaderSize;
    while (offset < bytes.size()) {
        const std::size_t index = capture.frames.size();
        if (bytes.size() - offset < kFrameHeaderSize) {
            capture.truncation = Truncation{index};
            break;
        }
        const FrameHeader h = parse_frame_header(bytes.subspan(offset, kFrameHeaderSize), capture.byte_order, index);
        offset += kFrameHeaderSize;
        if (bytes.size() - offset < h.incl_len) {
            capture.truncation = Truncation{index};
            break;
        }
        RawFrame frame;
        frame.ts_sec = h.ts_sec;
        frame.ts_frac = h.ts_frac;
        frame.original_len = h.orig_len;
        frame.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                             bytes.begin() + static_cast<std::ptrdiff_t>(offset + h.incl_len));
        offset += h.incl_len;
        capture.frames.push_back(std::move(frame));
    }
    return capture;
}

CaptureStream::CaptureStream(std::istream& in) : in_(in)
{
    std::array<std::uint8_t, kGlobalHeaderSize> buf{};
    in_.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    header_ = parse_global_header(std::span(buf.data(), static_cast<std::size_t>(in_.gcount())));
}

bool CaptureStream::next(RawFrame& frame)
{
    if (done_)
        return false;
    std::array<std::uint8_t, kFrameHeaderSize> buf{};
    in_.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    const auto got = static_cast<std::size_t>(in_.gcount());
    if (got == 0) {
        done_ = true;
        return false;
    }
    if (got < kFrameHeaderSize) {
        truncation_ = Truncation{index_};
        done_ = true;
        return false;
    }
    const FrameHeader h = parse_frame_header(buf, header_.byte_order, index_);
    frame.ts_sec = h.ts_sec;
    frame.ts_frac = h.ts_frac;
    frame.original_len = h.orig_len;
    frame.payload.resize(h.incl_len);
    in_.read(reinterpret_cast<char*>(frame.payload.data()), static_cast<std::streamsize>(h.incl_len));
    if (static_cast<std::size_t>(in_.gcount()) < h.incl_len) {
        truncation_ = Truncation{index_};
        done_ = true;
        return false;
    }
    ++index_;
    return true;
}

CaptureFile read_capture_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::Io, "cannot open " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                          std::istreambuf_iterator<char>());
    return parse_capture(bytes);
}

std::vector<std::uint8_t> write_capture(const CaptureFile& capture)
{
    std::vector<std::uint8_t> out;
    const ByteOrder order = capture.byte_order;
    put32(out, capture.ts_resolution == TsResolution::micro ? kMagicMicro : kMagicNano, order);
    put16(out, capture.version_major, order);
    put16(out, capture.version_minor, order);
    put32(out, static_cast<std::uint32_t>(capture.thiszone), order);
    put32(out, capture.sigfigs, order);
    put32(out, capture.snaplen, order);
    put32(out, capture.link_type, order);
    for (const RawFrame& frame : capture.frames) {
        put32(out, frame.ts_sec, order);
        put32(out, frame.ts_frac, order);
        put32(out, frame.captured_len(), order);
        put32(out, frame.original_len, order);
        out.insert(out.end(), frame.payload.begin(), frame.payload.end());
    }
    return out;
}

void write_capture_file(const CaptureFile& capture, const std::filesystem::path& path)
{
    const auto bytes = write_capture(capture);
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

DecodeResult decode_frame(const RawFrame& frame, std::uint32_t link_type)
{
    if (link_type != kLinkTypeEthernet)
        throw Error(ErrorCode::UnsupportedLinkType, "link type " + std::to_string(link_type));

    const std::span<const std::uint8_t> b(frame.payload);
    if (b.size() < kEthernetHeader)
        return TruncatedFrame{TruncatedLayer::link};

    PacketRecord rec;
    std::copy_n(b.begin(), 6, rec.dst_mac.octets.begin());
    std::copy_n(b.begin() + 6, 6, rec.src_mac.octets.begin());
    std::uint16_t ethertype = be16(b, 12);
    std::size_t ip_at = kEthernetHeader;
    if (ethertype == kEthertypeVlan) {
        if (b.size() < kEthernetHeader + kVlanTag)
            return TruncatedFrame{TruncatedLayer::link};
        ethertype = be16(b, 16);
        ip_at += kVlanTag;
    }
    if (ethertype != kEthertypeIpv4)
        return Skip{SkipReason::NotIpv4};

    if (b.size() < ip_at + 20)
        return TruncatedFrame{TruncatedLayer::ip};
    const std::uint8_t version = b[ip_at] >> 4;
    const std::size_t ihl = std::size_t{b[ip_at] & 0x0fu} * 4;
    if (version != 4 || ihl < 20)
        return Skip{SkipReason::MalformedIpv4};
    if (b.size() < ip_at + ihl)
        return TruncatedFrame{TruncatedLayer::ip};

    rec.ip_len = be16(b, ip_at + 2);
    if (rec.ip_len < ihl)
        return Skip{SkipReason::MalformedIpv4};
    const std::uint16_t frag_offset = be16(b, ip_at + 6) & 0x1fff;
    rec.ip_ttl = b[ip_at + 8];
    rec.ip_proto = b[ip_at + 9];
    rec.src_ip = Ipv4Address{be32(b, ip_at + 12)};
    rec.dst_ip = Ipv4Address{be32(b, ip_at + 16)};

    if (rec.ip_proto != kProtoTcp && rec.ip_proto != kProtoUdp)
        return rec;
    if (frag_offset != 0)
        return Skip{SkipReason::Fragment};

    // Transport bytes end at the IPv4 total length (Ethernet padding excluded) or the capture end.
    const std::size_t l4_at = ip_at + ihl;
    const std::size_t l4_end = std::min(b.size(), ip_at + rec.ip_len);
    const std::size_t l4_avail = l4_end > l4_at ? l4_end - l4_at : 0;

    if (rec.ip_proto == kProtoTcp) {
        if (l4_avail < 20)
            return TruncatedFrame{TruncatedLayer::transport};
        TcpHeader tcp;
        tcp.src_port = be16(b, l4_at);
        tcp.dst_port = be16(b, l4_at + 2);
        tcp.seq_raw = be32(b, l4_at + 4);
        tcp.ack_raw = be32(b, l4_at + 8);
        const auto data_offset = static_cast<std::size_t>(b[l4_at + 12] >> 4) * 4;
        tcp.flags = be16(b, l4_at + 12) & 0x01ff;
        tcp.window_raw = be16(b, l4_at + 14);
        if (data_offset > 20) {
            const std::size_t opt_end = std::min(l4_at + data_offset, l4_at + l4_avail);
            tcp.window_scale_option =
                find_window_scale(b.subspan(l4_at + 20, opt_end - (l4_at + 20)));
        }
        rec.transport = tcp;
    } else {
        if (l4_avail < 8)
            return TruncatedFrame{TruncatedLayer::transport};
        UdpHeader udp;
        udp.src_port = be16(b, l4_at);
        udp.dst_port = be16(b, l4_at + 2);
        udp.length = be16(b, l4_at + 4);
        rec.transport = udp;
    }
    return rec;
}

} // namespace devfp::capture
