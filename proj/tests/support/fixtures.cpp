#include "fixtures.hpp"

#include "packet_builder.hpp"

#include "devfp/rng.hpp"

#include <fstream>
#include <stdexcept>

namespace devfp::testing {

namespace {

using capture::TcpHeader;

constexpr std::uint16_t kSynAck = TcpHeader::kSyn | TcpHeader::kAck;
constexpr std::uint16_t kPshAck = TcpHeader::kPsh | TcpHeader::kAck;

const MacAddress kGateway = mac("02:00:00:00:00:01");

MacAddress filler_mac(std::uint32_t i)
{
    return MacAddress{{0x02, 0x10, static_cast<std::uint8_t>(i >> 16), static_cast<std::uint8_t>(i >> 8),
                       static_cast<std::uint8_t>(i), 0x01}};
}

Ipv4Address filler_ip(std::uint32_t i)
{
    return Ipv4Address{0x0a000000u + i + 1};
}

} // namespace

const std::vector<PublishedRow>& published_rows()
{
    static const std::vector<PublishedRow> rows = {
        {"62997,0,0,8688,,,60,64,6", "Aria"},
        {"38067,56,4352,14048,,,366,64,6", "D-LinkCam"},
        {"38067,56,4352,14048,,,366,64,6", "D-LinkCam"},
        {",,,,47581,653,65,64,17", "HueBridge"},
        {",,,,47581,653,65,64,17", "HueBridge"},
        {",,,,3074,1,443,4,17", "WeMoSwitch"},
        {"52266,22,,,,,76,64,17", "HueSwitch"},
    };
    return rows;
}

namespace {

struct Table2Hosts {
    MacAddress aria = mac("00:24:e4:20:00:01");
    MacAddress cam = mac("b0:c5:54:20:00:02");
    MacAddress bridge = mac("00:17:88:20:00:03");
    MacAddress wemo = mac("94:10:3e:20:00:04");
    MacAddress hue_switch = mac("00:17:88:20:00:05");
};

} // namespace

features::DeviceRegistry table2_registry()
{
    const Table2Hosts h;
    features::DeviceRegistry reg;
    reg.add(h.aria, {"Aria", features::DeviceType::iot});
    reg.add(h.cam, {"D-LinkCam", features::DeviceType::iot});
    reg.add(h.bridge, {"HueBridge", features::DeviceType::iot});
    reg.add(h.wemo, {"WeMoSwitch", features::DeviceType::iot});
    reg.add(h.hue_switch, {"HueSwitch", features::DeviceType::iot});
    return reg;
}

capture::CaptureFile table2_capture()
{
    const Table2Hosts h;
    CaptureBuilder cb;
    const Link aria{h.aria, kGateway, ip("192.168.1.10"), ip("52.0.0.1")};
    const Link cam{h.cam, kGateway, ip("192.168.1.11"), ip("52.0.0.4")};
    const Link bridge{h.bridge, kGateway, ip("192.168.1.12"), ip("52.0.0.2")};
    const Link wemo{h.wemo, kGateway, ip("192.168.1.13"), ip("52.0.0.3"), 4};
    const Link hue_switch{h.hue_switch, kGateway, ip("192.168.1.14"), ip("52.0.0.5")};

    // tcp stream 0: a 40-byte SYN header (options) gives ip.len 60; SYN windows are never scaled.
    cb.add(tcp_frame(aria, {62997, 443, 0x1000, 0, TcpHeader::kSyn, 8688, 6, 40}));
    cb.add(arp_frame(h.aria));
    cb.add(ipv6_frame(h.bridge));

    // udp streams 0 and 1; stream 1 is opened by the server talking to the switch.
    cb.add(udp_frame({filler_mac(0), kGateway, filler_ip(0), ip("8.8.8.8")}, 40000, 53, 30));
    cb.add(udp_frame(wemo.reversed(), 3478, 3074, 20));
    cb.add(ipv4_frame({filler_mac(1), kGateway, filler_ip(1), ip("8.8.4.4")}, 1, 56)); // ICMP

    // tcp streams 1..55 from unregistered hosts.
    for (std::uint32_t i = 1; i <= 55; ++i)
        cb.add(tcp_frame({filler_mac(100 + i), kGateway, filler_ip(100 + i), ip("93.184.216.34")},
                         {static_cast<std::uint16_t>(20000 + i), 80, i, i, kPshAck, 1024}, 10));

    // udp streams 2..652; stream 22 is the server's first packet to the hue switch.
    for (std::uint32_t j = 2; j <= 652; ++j) {
        if (j == 22)
            cb.add(udp_frame(hue_switch.reversed(), 5353, 52266, 12));
        else
            cb.add(udp_frame({filler_mac(1000 + j), kGateway, filler_ip(1000 + j), ip("8.8.8.8")},
                             static_cast<std::uint16_t>(30000 + j), 53, 30));
    }
    cb.add(udp_frame(bridge.reversed(), 1900, 47581, 40)); // udp stream 653

    // tcp stream 56 opens with the server's SYN-ACK; its ISN sits just below 2^32 so the
    // camera's relative ack wraps.
    constexpr std::uint32_t kServerIsn = 0xfffff000u;
    cb.add(tcp_frame(cam.reversed(), {80, 38067, kServerIsn, 0x2000, kSynAck, 29200, 7, 32}));
    for (int k = 0; k < 2; ++k)
        cb.add(tcp_frame(cam, {38067, 80, 0x2000u + static_cast<std::uint32_t>(k) * 326, kServerIsn + 4352, kPshAck, 14048},
                         326));

    cb.add(udp_frame(bridge, 47581, 1900, 37));
    cb.add(udp_frame(bridge, 47581, 1900, 37));
    cb.add(udp_frame(wemo, 3074, 3478, 415));
    // The published switch row mixes tcp columns with ip.proto 17; only the UDP reading
    // (ports 52266, stream 22, 76 bytes) is a packet that can exist.
    cb.add(udp_frame(hue_switch, 52266, 5353, 48));
    return cb.take();
}

capture::CaptureFile stream_capture(unsigned flips)
{
    struct Conversation {
        Link link;
        bool tcp;
        std::uint16_t a_port, b_port;
    };
    const std::vector<Conversation> convs = {
        {{mac("00:00:00:00:0a:01"), mac("00:00:00:00:0b:01"), ip("10.1.0.1"), ip("10.2.0.1")}, true, 41000, 443},
        {{mac("00:00:00:00:0a:02"), mac("00:00:00:00:0b:02"), ip("10.1.0.2"), ip("10.2.0.2")}, true, 41001, 80},
        {{mac("00:00:00:00:0a:03"), mac("00:00:00:00:0b:03"), ip("10.1.0.3"), ip("10.2.0.3")}, false, 5353, 53},
        {{mac("00:00:00:00:0a:04"), mac("00:00:00:00:0b:04"), ip("10.1.0.1"), ip("10.2.0.1")}, true, 41002, 443},
    };
    // (conversation, a-to-b?) in capture order; first appearances are 0, 1, 2, 3.
    const std::vector<std::pair<std::size_t, bool>> script = {
        {0, true}, {1, false}, {0, false}, {2, true}, {1, true}, {3, false},
        {2, false}, {0, true}, {3, true}, {1, false}, {2, true}, {3, false},
    };
    CaptureBuilder cb;
    std::uint32_t seq = 100;
    for (const auto& [ci, forward_in_script] : script) {
        const auto& c = convs[ci];
        const bool forward = forward_in_script != static_cast<bool>((flips >> ci) & 1u);
        const Link link = forward ? c.link : c.link.reversed();
        const std::uint16_t sp = forward ? c.a_port : c.b_port;
        const std::uint16_t dp = forward ? c.b_port : c.a_port;
        if (c.tcp)
            cb.add(tcp_frame(link, {sp, dp, seq, seq + 1, kPshAck, 512}, 8));
        else
            cb.add(udp_frame(link, sp, dp, 8));
        seq += 10;
    }
    return cb.take();
}

namespace {

struct Profile {
    std::string name;
    features::DeviceType type;
    MacAddress mac;
    std::uint8_t ttl;
    std::uint16_t window;
    std::optional<std::uint8_t> window_scale;
    std::uint16_t tcp_port_base;    // ephemeral range start
    std::uint16_t tcp_port_span;
    std::vector<std::uint16_t> udp_ports;
    std::vector<std::size_t> payloads;
    std::uint32_t tcp_share;        // percent of conversations that are TCP
};

std::vector<Profile> profiles()
{
    using features::DeviceType;
    return {
        {"Aria", DeviceType::iot, mac("00:24:e4:00:00:01"), 64, 8688, std::nullopt, 62990, 16, {123}, {0, 40, 120}, 90},
        {"D-LinkCam", DeviceType::iot, mac("b0:c5:54:00:00:02"), 64, 14048, std::nullopt, 38000, 128, {5353, 1900}, {326, 512, 1000}, 70},
        {"HueBridge", DeviceType::iot, mac("00:17:88:00:00:03"), 64, 16384, 0, 47500, 100, {47581, 1900}, {37, 120}, 30},
        {"WeMoSwitch", DeviceType::iot, mac("94:10:3e:00:00:04"), 4, 5840, std::nullopt, 3000, 100, {3074}, {415, 20}, 20},
        {"Laptop", DeviceType::non_iot, mac("3c:22:fb:00:00:05"), 64, 2058, 6, 49152, 16000, {5353, 137, 443}, {0, 517, 1200, 1448}, 85},
        {"Phone", DeviceType::non_iot, mac("f0:d1:a9:00:00:06"), 128, 4106, 8, 50000, 10000, {443, 53}, {0, 300, 1380}, 75},
    };
}

} // namespace

Corpus synthetic_corpus(std::uint64_t seed, std::size_t packets_per_device)
{
    const auto devices = profiles();
    Corpus corpus;
    for (std::size_t d = 0; d < devices.size(); ++d) {
        const auto& p = devices[d];
        corpus.registry_tsv += p.mac.to_string() + '\t' + p.name + '\t' + std::string(features::to_string(p.type)) + '\n';
    }

    // Two captures: the first half of the devices in one, the rest in the other,
    // with each file interleaving its devices' conversations.
    Rng rng(seed);
    const std::size_t per_file = (devices.size() + 1) / 2;
    for (std::size_t first = 0; first < devices.size(); first += per_file) {
        const std::size_t last = std::min(devices.size(), first + per_file);
        std::vector<std::size_t> emitted(devices.size(), 0);
        CaptureBuilder cb;
        std::uint32_t conv = 0;
        for (;;) {
            std::vector<std::size_t> active;
            for (std::size_t d = first; d < last; ++d)
                if (emitted[d] < packets_per_device)
                    active.push_back(d);
            if (active.empty())
                break;
            const auto& p = devices[active[rng.uniform(active.size())]];
            const std::size_t d = static_cast<std::size_t>(&p - devices.data());
            const Link link{p.mac, kGateway, Ipv4Address{0xc0a80100u + static_cast<std::uint32_t>(d) + 10},
                            Ipv4Address{0x34000000u + static_cast<std::uint32_t>(rng.uniform(64))}, p.ttl};
            const auto payload = [&] { return p.payloads[rng.uniform(p.payloads.size())]; };
            ++conv;
            if (rng.uniform(100) < p.tcp_share) {
                const auto sport = static_cast<std::uint16_t>(p.tcp_port_base + rng.uniform(p.tcp_port_span));
                const std::uint16_t dport = rng.uniform(2) ? 443 : 80;
                const auto isn = static_cast<std::uint32_t>(rng.next());
                const auto server_isn = static_cast<std::uint32_t>(rng.next());
                cb.add(tcp_frame(link, {sport, dport, isn, 0, TcpHeader::kSyn, p.window, p.window_scale,
                                        p.window_scale ? 24u : 20u}));
                cb.add(tcp_frame(link.reversed(), {dport, sport, server_isn, isn + 1, kSynAck, 65535, 7, 24}));
                ++emitted[d];
                const std::size_t exchanges = 1 + rng.uniform(4);
                std::uint32_t sent = 1, received = 1;
                for (std::size_t k = 0; k < exchanges && emitted[d] < packets_per_device; ++k) {
                    const std::size_t len = payload();
                    const auto win = static_cast<std::uint16_t>(p.window_scale ? p.window >> 2 : p.window);
                    cb.add(tcp_frame(link, {sport, dport, isn + sent, server_isn + received, kPshAck, win}, len));
                    sent += static_cast<std::uint32_t>(len);
                    ++emitted[d];
                    const std::size_t reply = 100 * (1 + rng.uniform(8));
                    cb.add(tcp_frame(link.reversed(), {dport, sport, server_isn + received, isn + sent, kPshAck, 512}, reply));
                    received += static_cast<std::uint32_t>(reply);
                }
            } else {
                const auto sport = p.udp_ports[rng.uniform(p.udp_ports.size())];
                cb.add(udp_frame(link, sport, 53 + static_cast<std::uint16_t>(conv % 7), payload() + 8));
                ++emitted[d];
            }
            if (conv % 50 == 0)
                cb.add(arp_frame(p.mac));
        }
        corpus.captures.push_back(cb.take());
    }
    return corpus;
}

std::vector<std::filesystem::path> write_corpus(const Corpus& corpus, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> paths;
    for (std::size_t i = 0; i < corpus.captures.size(); ++i) {
        paths.push_back(dir / ("capture_" + std::to_string(i) + ".pcap"));
        capture::write_capture_file(corpus.captures[i], paths.back());
    }
    std::ofstream reg(dir / "registry.tsv", std::ios::binary);
    reg << corpus.registry_tsv;
    if (!reg)
        throw std::runtime_error("cannot write registry");
    return paths;
}

} // namespace devfp::testing
