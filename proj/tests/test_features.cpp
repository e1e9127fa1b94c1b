#include "doctest.h"

#include "devfp/error.hpp"
#include "devfp/features.hpp"
#include "devfp/rng.hpp"

#include "support/fixtures.hpp"
#include "support/packet_builder.hpp"

#include <filesystem>
#include <set>
#include <sstream>

using namespace devfp;
using namespace devfp::features;
using capture::PacketRecord;
using capture::TcpHeader;
using devfp::testing::Link;

namespace {

PacketRecord decode(const std::vector<std::uint8_t>& bytes)
{
    capture::RawFrame f;
    f.payload = bytes;
    return std::get<PacketRecord>(capture::decode_frame(f));
}

const Link kA{testing::mac("00:00:00:00:00:0a"), testing::mac("00:00:00:00:00:0b"), testing::ip("10.0.0.1"),
              testing::ip("10.0.0.2")};
const Link kC{testing::mac("00:00:00:00:00:0c"), testing::mac("00:00:00:00:00:0b"), testing::ip("10.0.0.3"),
              testing::ip("10.0.0.2")};

// Observes then extracts, the way extract_capture does.
FeatureVector feed(ConversationTable& table, const PacketRecord& rec, ExtractOptions opt = {},
                   bool* fallback = nullptr)
{
    table.observe(rec);
    return extract_features(rec, table, opt, fallback);
}

ErrorCode code_of(auto&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::Io;
}

std::string cells_csv(const FeatureVector& fv)
{
    std::string s;
    const auto cells = fv.cells();
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i)
            s += ',';
        if (cells[i])
            s += format_number(*cells[i]);
    }
    return s;
}

} // namespace

TEST_CASE("conversation keys are direction-insensitive")
{
    const Endpoint a{testing::ip("10.0.0.1"), 1000};
    const Endpoint b{testing::ip("10.0.0.2"), 80};
    CHECK(ConversationKey::normalize(L4Proto::tcp, a, b) == ConversationKey::normalize(L4Proto::tcp, b, a));
    CHECK(ConversationKey::normalize(L4Proto::tcp, a, b) != ConversationKey::normalize(L4Proto::udp, a, b));
}

TEST_CASE("stream indices: A(tcp), B(tcp), C(udp), A(tcp) -> 0, 1, 0, 0")
{
    ConversationTable t;
    const auto a = decode(testing::tcp_frame(kA, {1000, 80, 1, 1}));
    const auto b = decode(testing::tcp_frame(kA, {1001, 80, 1, 1}));
    const auto c = decode(testing::udp_frame(kC, 53, 53));
    const auto a_reply = decode(testing::tcp_frame(kA.reversed(), {80, 1000, 1, 1}));
    CHECK(t.assign_stream_index(a) == 0);
    CHECK(t.assign_stream_index(b) == 1);
    CHECK(t.assign_stream_index(c) == 0);
    CHECK(t.assign_stream_index(a) == 0);
    CHECK(t.assign_stream_index(a_reply) == 0);
    CHECK(t.conversation_count(L4Proto::tcp) == 2);
    CHECK(t.conversation_count(L4Proto::udp) == 1);
    CHECK(t.observe(decode(testing::ipv4_frame(kA, 1, 8))) == nullptr);
}

TEST_CASE("stream indices ignore packet direction")
{
    for (unsigned flips = 0; flips < 16; ++flips) {
        ExtractStats stats;
        const auto rows = extract_capture(testing::stream_capture(flips), {}, stats);
        std::vector<std::string> got;
        for (const auto& r : rows)
            got.push_back(r.features.tcp_stream ? "t" + std::to_string(*r.features.tcp_stream)
                                                : "u" + std::to_string(*r.features.udp_stream));
        const std::vector<std::string> want = {"t0", "t1", "t0", "u0", "t1", "t2",
                                               "u0", "t0", "t2", "t1", "u0", "t2"};
        CHECK(got == want);
    }
}

TEST_CASE("stream indices are dense per protocol on random captures")
{
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        testing::CaptureBuilder cb;
        for (int i = 0; i < 60; ++i) {
            Link l{testing::mac("00:00:00:00:00:01"), testing::mac("00:00:00:00:00:02"),
                   Ipv4Address{static_cast<std::uint32_t>(0x0a000000 + rng.uniform(4))},
                   Ipv4Address{static_cast<std::uint32_t>(0x0a000000 + rng.uniform(4))}};
            const auto sp = static_cast<std::uint16_t>(rng.uniform(3));
            const auto dp = static_cast<std::uint16_t>(rng.uniform(3));
            if (rng.uniform(2))
                cb.add(testing::tcp_frame(l, {sp, dp, 0, 0}));
            else
                cb.add(testing::udp_frame(l, sp, dp));
        }
        ExtractStats stats;
        std::set<std::uint32_t> tcp, udp;
        std::uint32_t tcp_max_seen = 0, udp_max_seen = 0;
        bool ordered = true;
        for (const auto& r : extract_capture(cb.capture(), {}, stats)) {
            if (r.features.tcp_stream) {
                const auto s = *r.features.tcp_stream;
                ordered = ordered && (tcp.count(s) || s == tcp.size());
                tcp.insert(s);
                tcp_max_seen = std::max(tcp_max_seen, s);
            } else {
                const auto s = *r.features.udp_stream;
                ordered = ordered && (udp.count(s) || s == udp.size());
                udp.insert(s);
                udp_max_seen = std::max(udp_max_seen, s);
            }
        }
        CHECK(ordered);
        CHECK((tcp.empty() || tcp_max_seen + 1 == tcp.size()));
        CHECK((udp.empty() || udp_max_seen + 1 == udp.size()));
    }
}

TEST_CASE("relative ack")
{
    ConversationTable t;
    SUBCASE("SYN without ACK is 0")
    {
        const auto syn = decode(testing::tcp_frame(kA, {1000, 80, 5, 12345, TcpHeader::kSyn, 100}));
        t.observe(syn);
        const auto r = relative_ack(syn, t);
        CHECK(r.value == 0);
        CHECK_FALSE(r.raw_fallback);
    }
    SUBCASE("ack minus the reverse ISN, wrapping")
    {
        const auto syn_ack = decode(testing::tcp_frame(kA.reversed(), {80, 1000, 0xfffff000u, 1,
                                                                       TcpHeader::kSyn | TcpHeader::kAck, 100}));
        t.observe(syn_ack);
        const auto pkt = decode(testing::tcp_frame(kA, {1000, 80, 1, 0xfffff000u + 4352}));
        t.observe(pkt);
        CHECK(relative_ack(pkt, t).value == 4352);
        CHECK_FALSE(relative_ack(pkt, t).raw_fallback);
        CHECK(relative_ack(pkt, t, true).value == 0xfffff000u + 4352);
    }
    SUBCASE("no SYN seen: raw with a fallback flag")
    {
        const auto pkt = decode(testing::tcp_frame(kA, {1000, 80, 1, 1000}));
        bool fallback = false;
        const auto fv = feed(t, pkt, {}, &fallback);
        CHECK(fv.tcp_ack == 1000u);
        CHECK(fallback);
    }
}

TEST_CASE("window scaling uses the sender's own SYN option and skips SYNs")
{
    ConversationTable t;
    const auto syn = decode(testing::tcp_frame(kA, {1000, 80, 5, 0, TcpHeader::kSyn, 100, 2, 24}));
    CHECK(feed(t, syn).tcp_window_size == 100u);
    const auto data = decode(testing::tcp_frame(kA, {1000, 80, 6, 0, TcpHeader::kAck, 100}));
    CHECK(feed(t, data).tcp_window_size == 400u);
    // The peer announced nothing: its windows stay raw.
    const auto reply = decode(testing::tcp_frame(kA.reversed(), {80, 1000, 9, 6, TcpHeader::kAck, 100}));
    CHECK(feed(t, reply).tcp_window_size == 100u);
    // Shift capped at 14.
    ConversationTable t2;
    feed(t2, decode(testing::tcp_frame(kC, {1, 2, 0, 0, TcpHeader::kSyn, 1, 20, 24})));
    CHECK(feed(t2, decode(testing::tcp_frame(kC, {1, 2, 1, 0, TcpHeader::kAck, 1}))).tcp_window_size == 1u << 14);
}

TEST_CASE("extracted vectors: Aria SYN, HueBridge UDP, ICMP")
{
    ConversationTable t;
    const Link aria{testing::mac("00:24:e4:00:00:01"), testing::mac("02:00:00:00:00:01"), testing::ip("192.168.1.10"),
                    testing::ip("52.0.0.1")};
    const auto fv = feed(t, decode(testing::tcp_frame(aria, {62997, 443, 77, 0, TcpHeader::kSyn, 8688, 6, 40})));
    CHECK(cells_csv(fv) == "62997,0,0,8688,,,60,64,6");

    const auto udp = feed(t, decode(testing::udp_frame(aria, 47581, 1900, 37)));
    CHECK(cells_csv(udp) == ",,,,47581,0,65,64,17");

    const auto icmp = feed(t, decode(testing::ipv4_frame(aria, 1, 36)));
    CHECK(cells_csv(icmp) == ",,,,,,56,64,1");
}

TEST_CASE("transport presence follows ip.proto on the fixture corpus")
{
    const auto corpus = testing::synthetic_corpus(5, 60);
    for (const auto& cap : corpus.captures) {
        ExtractStats stats;
        for (const auto& p : extract_capture(cap, {}, stats)) {
            const auto& f = p.features;
            REQUIRE(f.ip_len);
            REQUIRE(f.ip_ttl);
            REQUIRE(f.ip_proto);
            const bool tcp = *f.ip_proto == 6, udp = *f.ip_proto == 17;
            CHECK(f.tcp_srcport.has_value() == tcp);
            CHECK(f.tcp_stream.has_value() == tcp);
            CHECK(f.tcp_ack.has_value() == tcp);
            CHECK(f.tcp_window_size.has_value() == tcp);
            CHECK(f.udp_srcport.has_value() == udp);
            CHECK(f.udp_stream.has_value() == udp);
        }
    }
}

TEST_CASE("extraction is a pure function of the capture")
{
    const auto corpus = testing::synthetic_corpus(9, 40);
    const auto reg = DeviceRegistry::parse(corpus.registry_tsv);
    auto run = [&] {
        ExtractStats stats;
        std::vector<ExtractedPacket> all;
        for (const auto& cap : corpus.captures) {
            auto rows = extract_capture(cap, {}, stats);
            all.insert(all.end(), rows.begin(), rows.end());
        }
        return write_csv(label_by_source_mac(all, reg).dataset);
    };
    CHECK(run() == run());
}

TEST_CASE("streaming file extraction matches in-memory extraction")
{
    const auto corpus = testing::synthetic_corpus(4, 30);
    const auto dir = std::filesystem::temp_directory_path() / "devfp_stream_extract";
    std::filesystem::remove_all(dir);
    const auto files = testing::write_corpus(corpus, dir);
    const auto reg = DeviceRegistry::parse(corpus.registry_tsv);
    const MacFilter registered = [&](const MacAddress& m) { return reg.lookup(m) != nullptr; };
    for (std::size_t i = 0; i < corpus.captures.size(); ++i) {
        ExtractStats a, b, c;
        const auto mem = extract_capture(corpus.captures[i], {}, a);
        const auto streamed = extract_capture_file(files[i], {}, b);
        REQUIRE(mem.size() == streamed.size());
        for (std::size_t k = 0; k < mem.size(); ++k) {
            CHECK(mem[k].features == streamed[k].features);
            CHECK(mem[k].frame_index == streamed[k].frame_index);
        }
        CHECK(a.frames == b.frames);
        CHECK(a.ipv4_packets == b.ipv4_packets);

        // Filtering keeps stream indices as if nothing were filtered.
        const auto filtered = extract_capture_file(files[i], {}, c, registered);
        std::vector<ExtractedPacket> expected;
        for (const auto& p : mem)
            if (registered(p.src_mac))
                expected.push_back(p);
        REQUIRE(filtered.size() == expected.size());
        for (std::size_t k = 0; k < filtered.size(); ++k)
            CHECK(filtered[k].features == expected[k].features);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("published rows fixture: six of seven rows reproduce")
{
    ExtractStats stats;
    const auto rows = extract_capture(testing::table2_capture(), {}, stats);
    const auto labeled = label_by_source_mac(rows, testing::table2_registry());
    const auto& ds = labeled.dataset;
    const auto& want = testing::published_rows();
    REQUIRE(ds.size() == want.size());
    CHECK(stats.skipped_non_ipv4 == 2);
    for (std::size_t i = 0; i + 1 < want.size(); ++i) {
        std::string got;
        for (std::size_t a = 0; a < ds.attribute_count(); ++a) {
            if (a)
                got += ',';
            if (ds.at(i, a))
                got += format_number(*ds.at(i, a));
        }
        CHECK(got == want[i].cells);
        CHECK(*ds.label_name(i) == want[i].device);
    }
}

TEST_CASE("device registry")
{
    const auto reg = DeviceRegistry::parse("# comment\n\n00:24:e4:00:00:01\tAria\tiot\n3c:22:fb:00:00:05\tLaptop\tnon-iot\n");
    CHECK(reg.size() == 2);
    REQUIRE(reg.lookup(testing::mac("00:24:e4:00:00:01")));
    CHECK(reg.lookup(testing::mac("00:24:e4:00:00:01"))->name == "Aria");
    CHECK(reg.type_of("Laptop") == DeviceType::non_iot);
    CHECK_FALSE(reg.type_of("Nope"));

    CHECK(code_of([] { DeviceRegistry::parse("00:00:00:00:00:01\tA\tiot\n00:00:00:00:00:01\tB\tiot\n"); }) ==
          ErrorCode::InvalidRegistry);
    CHECK(code_of([] { DeviceRegistry::parse("00:00:00:00:00:01\tA\tiot\n00:00:00:00:00:02\tA\tnon-iot\n"); }) ==
          ErrorCode::InvalidRegistry);
    CHECK(code_of([] { DeviceRegistry::parse("00:24:E4:00:00:01\tAria\tiot\n"); }) == ErrorCode::InvalidRegistry);
    CHECK(code_of([] { DeviceRegistry::parse("zz:00:00:00:00:01\tA\tiot\n"); }) == ErrorCode::InvalidRegistry);
    CHECK(code_of([] { DeviceRegistry::parse("00:00:00:00:00:01\tA\tfridge\n"); }) == ErrorCode::InvalidRegistry);
    CHECK(code_of([] { DeviceRegistry::parse("00:00:00:00:00:01\t\tiot\n"); }) == ErrorCode::InvalidRegistry);
}

TEST_CASE("labelling by source MAC: 10 packets, 6 registered")
{
    DeviceRegistry reg;
    reg.add(testing::mac("00:00:00:00:00:0a"), {"DevA", DeviceType::iot});
    reg.add(testing::mac("00:00:00:00:00:0c"), {"DevC", DeviceType::non_iot});
    std::vector<ExtractedPacket> pkts;
    for (int i = 0; i < 10; ++i) {
        ExtractedPacket p;
        p.features.ip_len = 40u + static_cast<std::uint32_t>(i);
        p.features.ip_ttl = 64u;
        p.features.ip_proto = 1u;
        p.src_mac = i < 4 ? testing::mac("00:00:00:00:00:0a") : i < 6 ? testing::mac("00:00:00:00:00:0c")
                                                                       : testing::mac("00:00:00:00:00:0f");
        pkts.push_back(p);
    }
    const auto r = label_by_source_mac(pkts, reg);
    CHECK(r.kept == 6);
    CHECK(r.dropped_unregistered == 4);
    CHECK(r.dataset.size() == 6);
    CHECK(r.dataset.class_names() == std::vector<std::string>{"DevA", "DevC"});

    const auto by_type = label_by_source_mac(pkts, reg, ClassAttribute::device_type);
    CHECK(by_type.dataset.class_names() == std::vector<std::string>{"iot", "non-iot"});
    CHECK(relabel_by_type(r.dataset, reg) == by_type.dataset);

    CHECK(code_of([&] { label_by_source_mac(pkts, DeviceRegistry{}); }) == ErrorCode::EmptyRegistry);
}

TEST_CASE("cleaning")
{
    Dataset d(canonical_schema());
    const std::vector<Cell> empty(9);
    std::vector<Cell> cam = {38067.0, 56.0, 4352.0, 14048.0, {}, {}, 366.0, 64.0, 6.0};
    d.add_row(empty, "X");
    d.add_row(cam, "D-LinkCam");
    d.add_row(cam, "D-LinkCam");
    d.add_row(cam, "Other");

    const auto kept = clean(d, false);
    CHECK(kept.empty_rows_removed == 1);
    CHECK(kept.duplicates_removed == 0);
    CHECK(kept.dataset.size() == 3);

    const auto dedup = clean(d, true);
    CHECK(dedup.duplicates_removed == 1);
    CHECK(dedup.dataset.size() == 2);
    CHECK(*dedup.dataset.label_name(1) == "Other");
}

TEST_CASE("csv: Aria row, empty dataset, errors")
{
    Dataset d(canonical_schema());
    const std::vector<Cell> aria = {62997.0, 0.0, 0.0, 8688.0, {}, {}, 60.0, 64.0, 6.0};
    d.add_row(aria, "Aria");
    CHECK(write_csv(d) == std::string(kCsvHeader) + "\n62997,0,0,8688,,,60,64,6,Aria\n");

    const Dataset empty(canonical_schema());
    CHECK(write_csv(empty) == std::string(kCsvHeader) + "\n");
    CHECK(read_csv(write_csv(empty)).size() == 0);

    const std::string h(kCsvHeader);
    CHECK(code_of([] { read_csv("tcp.srcport,class\n1,A\n"); }) == ErrorCode::HeaderMismatch);
    CHECK(code_of([&] { read_csv(h + "\n1,2,3\n"); }) == ErrorCode::RaggedRow);
    CHECK(code_of([&] { read_csv(h + "\n1,2,3,x,,,60,64,6,A\n"); }) == ErrorCode::NonNumericCell);
    CHECK(code_of([&] { read_csv(h + "\n-1,2,3,4,,,60,64,6,A\n"); }) == ErrorCode::NonNumericCell);

    Dataset narrow(std::vector<std::string>{"ip.len"});
    CHECK(code_of([&] { (void)write_csv(narrow); }) == ErrorCode::HeaderMismatch);
    Dataset bad_label(canonical_schema());
    bad_label.add_row(aria, "A,B");
    CHECK(code_of([&] { (void)write_csv(bad_label); }) == ErrorCode::InvalidLabel);
}

TEST_CASE("csv tolerates CRLF and a trailing missing newline")
{
    const std::string text = std::string(kCsvHeader) + "\r\n,,,,47581,653,65,64,17,HueBridge";
    const auto d = read_csv(text);
    REQUIRE(d.size() == 1);
    CHECK(d.at(0, 4) == Cell(47581.0));
    CHECK_FALSE(d.at(0, 0));
}

TEST_CASE("csv round trip on random datasets")
{
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        Dataset d(canonical_schema(), rng.uniform(2) ? ClassAttribute::device_name : ClassAttribute::device_type);
        const std::size_t n = rng.uniform(30);
        for (std::size_t r = 0; r < n; ++r) {
            std::vector<Cell> cells(9);
            for (auto& c : cells)
                if (rng.uniform(3))
                    c = static_cast<double>(rng.uniform(70000));
            d.add_row(cells, "dev" + std::to_string(rng.uniform(5)));
        }
        const auto back = read_csv(write_csv(d), d.class_attribute());
        CHECK(back == d);
    }
}
