#pragma once

// Per-packet fingerprint extraction: conversation tracking, the nine header
// features, MAC-based labelling, cleaning and the canonical CSV format.

#include "devfp/capture.hpp"
#include "devfp/dataset.hpp"
#include "devfp/net_types.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace devfp::features {

inline constexpr std::size_t kFeatureCount = 9;

/// Column order of the canonical dataset and CSV header.
inline const std::array<std::string, kFeatureCount> kFeatureNames = {
    "tcp.srcport", "tcp.stream", "tcp.ack",  "tcp.window_size", "udp.srcport",
    "udp.stream",  "ip.len",     "ip.ttl",   "ip.proto",
};
inline constexpr std::string_view kClassColumn = "class";
inline constexpr std::string_view kCsvHeader =
    "tcp.srcport,tcp.stream,tcp.ack,tcp.window_size,udp.srcport,udp.stream,ip.len,ip.ttl,ip.proto,class";

std::vector<std::string> canonical_schema();

// ---------------------------------------------------------------------------
// Conversations

enum class L4Proto { tcp = 0, udp = 1 };

struct ConversationKey {
    L4Proto proto = L4Proto::tcp;
    Endpoint lo;
    Endpoint hi;

    /// Direction-insensitive: normalize(p, a, b) == normalize(p, b, a).
    static ConversationKey normalize(L4Proto proto, const Endpoint& a, const Endpoint& b);
    auto operator<=>(const ConversationKey&) const = default;
};

struct ConversationState {
    std::uint32_t stream_index = 0;
    Endpoint first_src;
    // Initial sequence numbers and window-scale shifts learned from SYN segments,
    // per direction (fwd = sent by first_src).
    std::optional<std::uint32_t> fwd_isn;
    std::optional<std::uint32_t> rev_isn;
    std::optional<std::uint8_t> fwd_window_scale;
    std::optional<std::uint8_t> rev_window_scale;
};

/// Stream indices are 0-based first-appearance ordinals, counted separately for TCP and UDP.
class ConversationTable {
public:
    /// Looks up or allocates the conversation of a TCP/UDP record and records
    /// SYN-time state (ISN, window scale). Returns nullptr for other protocols.
    ConversationState* observe(const capture::PacketRecord& record);

    /// Index only; allocates on first sight. Precondition: record is TCP or UDP.
    std::uint32_t assign_stream_index(const capture::PacketRecord& record);

    const ConversationState* find(const capture::PacketRecord& record) const;
    std::uint32_t conversation_count(L4Proto proto) const
    {
        return next_index_[static_cast<std::size_t>(proto)];
    }

private:
    std::map<ConversationKey, ConversationState> conversations_;
    std::array<std::uint32_t, 2> next_index_{0, 0};
};

struct RelativeAck {
    std::uint32_t value = 0;
    bool raw_fallback = false; // reverse ISN unknown, raw ack returned
};

/// ack_raw minus the reverse direction's ISN (mod 2^32); 0 when the ACK flag is clear.
/// Precondition: record is TCP and has been observed by `table`.
RelativeAck relative_ack(const capture::PacketRecord& record, const ConversationTable& table,
                         bool raw_ack = false);

// ---------------------------------------------------------------------------
// Feature vectors

enum class DeviceType { iot, non_iot };

std::string_view to_string(DeviceType type);
std::optional<DeviceType> parse_device_type(std::string_view text);

struct FeatureVector {
    std::optional<std::uint32_t> tcp_srcport;
    std::optional<std::uint32_t> tcp_stream;
    std::optional<std::uint32_t> tcp_ack;
    std::optional<std::uint32_t> tcp_window_size;
    std::optional<std::uint32_t> udp_srcport;
    std::optional<std::uint32_t> udp_stream;
    std::optional<std::uint32_t> ip_len;
    std::optional<std::uint32_t> ip_ttl;
    std::optional<std::uint32_t> ip_proto;
    std::optional<std::string> label;
    std::optional<DeviceType> type_label;

    /// Cells in kFeatureNames order.
    std::array<Cell, kFeatureCount> cells() const;
    bool operator==(const FeatureVector&) const = default;
};

struct ExtractOptions {
    bool raw_ack = false;
};

/// Fills the nine features. Precondition: `record` was already passed to table.observe().
FeatureVector extract_features(const capture::PacketRecord& record, const ConversationTable& table,
                               const ExtractOptions& options = {},
                               bool* raw_ack_fallback = nullptr);

struct ExtractedPacket {
    FeatureVector features;
    MacAddress src_mac;
    std::size_t frame_index = 0;
};

struct ExtractStats {
    std::size_t frames = 0;
    std::size_t ipv4_packets = 0;
    std::size_t skipped_non_ipv4 = 0;
    std::size_t skipped_malformed = 0;
    std::size_t skipped_fragments = 0;
    std::size_t truncated_frames = 0;
    std::size_t truncated_files = 0;
    std::size_t raw_ack_fallbacks = 0;

    ExtractStats& operator+=(const ExtractStats& other);
};

/// Optional source-MAC filter; packets it rejects still advance conversation state.
using MacFilter = std::function<bool(const MacAddress&)>;

/// Runs one capture through decoding, conversation tracking and extraction, in frame order.
std::vector<ExtractedPacket> extract_capture(const capture::CaptureFile& capture,
                                             const ExtractOptions& options, ExtractStats& stats,
                                             const MacFilter& keep = {});
/// Same, reading the file frame by frame instead of loading it whole.
std::vector<ExtractedPacket> extract_capture_file(const std::filesystem::path& path,
                                                  const ExtractOptions& options, ExtractStats& stats,
                                                  const MacFilter& keep = {});

// ---------------------------------------------------------------------------
// Labelling

struct DeviceInfo {
    std::string name;
    DeviceType type = DeviceType::iot;
};

/// MAC address -> device. Text form: one `mac<TAB>name<TAB>{iot|non-iot}` per line;
/// blank lines and lines starting with '#' are ignored.
class DeviceRegistry {
public:
    static DeviceRegistry parse(std::string_view text);
    static DeviceRegistry load(const std::filesystem::path& path);

    /// Throws Error{InvalidRegistry} on duplicate MAC, empty or malformed name,
    /// or one name registered with two different types.
    void add(const MacAddress& mac, DeviceInfo info);

    const DeviceInfo* lookup(const MacAddress& mac) const;
    std::optional<DeviceType> type_of(const std::string& name) const;
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::map<MacAddress, DeviceInfo>& entries() const { return entries_; }

private:
    std::map<MacAddress, DeviceInfo> entries_;
};

struct LabelResult {
    Dataset dataset;
    std::size_t kept = 0;
    std::size_t dropped_unregistered = 0;
};

/// Keeps packets whose source MAC is registered; the class column holds the device
/// name or its type. Throws Error{EmptyRegistry}.
LabelResult label_by_source_mac(const std::vector<ExtractedPacket>& packets,
                                const DeviceRegistry& registry,
                                ClassAttribute class_attribute = ClassAttribute::device_name);

/// Rewrites device-name labels as device types. Labels that are already
/// "iot"/"non-iot" pass through. Throws Error{UnknownClass} for unregistered names.
Dataset relabel_by_type(const Dataset& dataset, const DeviceRegistry& registry);

struct CleanResult {
    Dataset dataset;
    std::size_t empty_rows_removed = 0;
    std::size_t duplicates_removed = 0;
};

/// Drops all-Absent rows, and with `dedup` exact duplicate (features + label) rows, keeping the first.
CleanResult clean(const Dataset& dataset, bool dedup);

// ---------------------------------------------------------------------------
// CSV

/// Canonical 10-column CSV. Throws Error{HeaderMismatch} if the schema is not canonical
/// and Error{InvalidLabel} for labels containing ',', '\n' or '\r'.
void write_csv(const Dataset& dataset, std::ostream& out);
std::string write_csv(const Dataset& dataset);
void write_csv_file(const Dataset& dataset, const std::filesystem::path& path);

/// Cells must be empty or non-negative numbers. Throws Error{HeaderMismatch | RaggedRow | NonNumericCell}.
Dataset read_csv(std::istream& in, ClassAttribute class_attribute = ClassAttribute::device_name);
Dataset read_csv(std::string_view text, ClassAttribute class_attribute = ClassAttribute::device_name);
Dataset read_csv_file(const std::filesystem::path& path,
                      ClassAttribute class_attribute = ClassAttribute::device_name);

/// Shortest text that parses back to the same double; integers print without a fraction.
std::string format_number(double value);

} // namespace devfp::features
