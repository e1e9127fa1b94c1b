#include "devfp/features.hpp"

#include "devfp/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace devfp::features {

using capture::PacketRecord;
using capture::TcpHeader;

std::vector<std::string> canonical_schema()
{
    return {kFeatureNames.begin(), kFeatureNames.end()};
}

ConversationKey ConversationKey::normalize(L4Proto proto, const Endpoint& a, const Endpoint& b)
{
    return a <= b ? ConversationKey{proto, a, b} : ConversationKey{proto, b, a};
}

namespace {

struct Flow {
    L4Proto proto;
    Endpoint src;
    Endpoint dst;
};

std::optional<Flow> flow_of(const PacketRecord& record)
{
    if (const auto* tcp = record.tcp())
        return Flow{L4Proto::tcp, {record.src_ip, tcp->src_port}, {record.dst_ip, tcp->dst_port}};
    if (const auto* udp = record.udp())
        return Flow{L4Proto::udp, {record.src_ip, udp->src_port}, {record.dst_ip, udp->dst_port}};
    return std::nullopt;
}

bool is_forward(const ConversationState& state, const PacketRecord& record)
{
    const auto flow = flow_of(record);
    return flow && flow->src == state.first_src;
}

} // namespace

ConversationState* ConversationTable::observe(const PacketRecord& record)
{
    const auto flow = flow_of(record);
    if (!flow)
        return nullptr;
    const auto key = ConversationKey::normalize(flow->proto, flow->src, flow->dst);
    auto it = conversations_.find(key);
    if (it == conversations_.end()) {
        ConversationState state;
        state.stream_index = next_index_[static_cast<std::size_t>(flow->proto)]++;
        state.first_src = flow->src;
        it = conversations_.emplace(key, state).first;
    }
    ConversationState& state = it->second;
    if (const auto* tcp = record.tcp(); tcp && tcp->has(TcpHeader::kSyn)) {
        const bool fwd = flow->src == state.first_src;
        auto& isn = fwd ? state.fwd_isn : state.rev_isn;
        auto& scale = fwd ? state.fwd_window_scale : state.rev_window_scale;
        if (!isn) {
            isn = tcp->seq_raw;
            scale = tcp->window_scale_option;
        }
    }
    return &state;
}

std::uint32_t ConversationTable::assign_stream_index(const PacketRecord& record)
{
    const ConversationState* state = observe(record);
    if (!state)
        throw Error(ErrorCode::SchemaMismatch, "stream index requested for a non-TCP/UDP packet");
    return state->stream_index;
}

const ConversationState* ConversationTable::find(const PacketRecord& record) const
{
    const auto flow = flow_of(record);
    if (!flow)
        return nullptr;
    const auto it = conversations_.find(ConversationKey::normalize(flow->proto, flow->src, flow->dst));
    return it == conversations_.end() ? nullptr : &it->second;
}

RelativeAck relative_ack(const PacketRecord& record, const ConversationTable& table, bool raw_ack)
{
    const TcpHeader* tcp = record.tcp();
    if (!tcp)
        throw Error(ErrorCode::SchemaMismatch, "relative_ack on a non-TCP packet");
    if (!tcp->has(TcpHeader::kAck))
        return {0, false};
    if (raw_ack)
        return {tcp->ack_raw, false};
    const ConversationState* state = table.find(record);
    if (state) {
        const auto& reverse_isn = is_forward(*state, record) ? state->rev_isn : state->fwd_isn;
        if (reverse_isn)
            return {tcp->ack_raw - *reverse_isn, false};
    }
    return {tcp->ack_raw, true};
}

std::string_view to_string(DeviceType type)
{
    return type == DeviceType::iot ? "iot" : "non-iot";
}

std::optional<DeviceType> parse_device_type(std::string_view text)
{
    if (text == "iot" || text == "IoT")
        return DeviceType::iot;
    if (text == "non-iot" || text == "NonIoT")
        return DeviceType::non_iot;
    return std::nullopt;
}

std::array<Cell, kFeatureCount> FeatureVector::cells() const
{
    const auto cell = [](const std::optional<std::uint32_t>& v) -> Cell {
        return v ? Cell(static_cast<double>(*v)) : std::nullopt;
    };
    return {cell(tcp_srcport), cell(tcp_stream), cell(tcp_ack),    cell(tcp_window_size),
            cell(udp_srcport), cell(udp_stream), cell(ip_len),     cell(ip_ttl),
            cell(ip_proto)};
}

FeatureVector extract_features(const PacketRecord& record, const ConversationTable& table,
                               const ExtractOptions& options, bool* raw_ack_fallback)
{
    FeatureVector fv;
    fv.ip_len = record.ip_len;
    fv.ip_ttl = record.ip_ttl;
    fv.ip_proto = record.ip_proto;
    if (raw_ack_fallback)
        *raw_ack_fallback = false;

    const ConversationState* state = table.find(record);
    if (const TcpHeader* tcp = record.tcp()) {
        fv.tcp_srcport = tcp->src_port;
        if (state)
            fv.tcp_stream = state->stream_index;
        const RelativeAck ack = relative_ack(record, table, options.raw_ack);
        fv.tcp_ack = ack.value;
        if (raw_ack_fallback)
            *raw_ack_fallback = ack.raw_fallback;

        std::uint32_t window = tcp->window_raw;
        if (state && !tcp->has(TcpHeader::kSyn)) {
            const auto& scale =
                is_forward(*state, record) ? state->fwd_window_scale : state->rev_window_scale;
            if (scale)
                window <<= std::min<std::uint8_t>(*scale, 14);
        }
        fv.tcp_window_size = window;
    } else if (const auto* udp = record.udp()) {
        fv.udp_srcport = udp->src_port;
        if (state)
            fv.udp_stream = state->stream_index;
    }
    return fv;
}

ExtractStats& ExtractStats::operator+=(const ExtractStats& o)
{
    frames += o.frames;
    ipv4_packets += o.ipv4_packets;
    skipped_non_ipv4 += o.skipped_non_ipv4;
    skipped_malformed += o.skipped_malformed;
    skipped_fragments += o.skipped_fragments;
    truncated_frames += o.truncated_frames;
    truncated_files += o.truncated_files;
    raw_ack_fallbacks += o.raw_ack_fallbacks;
    return *this;
}

namespace {

// Shared per-frame step for the in-memory and streaming paths.
struct FrameExtractor {
    const ExtractOptions& options;
    ExtractStats& stats;
    const MacFilter& keep;
    ConversationTable table;

    void step(const capture::RawFrame& frame, std::uint32_t link_type, std::size_t index,
              std::vector<ExtractedPacket>& out)
    {
        ++stats.frames;
        const auto decoded = capture::decode_frame(frame, link_type);
        if (const auto* skip = std::get_if<capture::Skip>(&decoded)) {
            switch (skip->reason) {
            case capture::SkipReason::NotIpv4: ++stats.skipped_non_ipv4; break;
            case capture::SkipReason::MalformedIpv4: ++stats.skipped_malformed; break;
            case capture::SkipReason::Fragment: ++stats.skipped_fragments; break;
            }
            return;
        }
        if (std::holds_alternative<capture::TruncatedFrame>(decoded)) {
            ++stats.truncated_frames;
            return;
        }
        const auto& record = std::get<PacketRecord>(decoded);
        ++stats.ipv4_packets;
        // Every packet updates the table, so stream indices do not depend on the filter.
        table.observe(record);
        if (keep && !keep(record.src_mac))
            return;
        bool fallback = false;
        out.push_back({extract_features(record, table, options, &fallback), record.src_mac, index});
        if (fallback)
            ++stats.raw_ack_fallbacks;
    }
};

} // namespace

std::vector<ExtractedPacket> extract_capture(const capture::CaptureFile& capture,
                                             const ExtractOptions& options, ExtractStats& stats,
                                             const MacFilter& keep)
{
    std::vector<ExtractedPacket> out;
    FrameExtractor ex{options, stats, keep, {}};
    if (capture.truncation)
        ++stats.truncated_files;
    for (std::size_t i = 0; i < capture.frames.size(); ++i)
        ex.step(capture.frames[i], capture.link_type, i, out);
    return out;
}

std::vector<ExtractedPacket> extract_capture_file(const std::filesystem::path& path,
                                                  const ExtractOptions& options, ExtractStats& stats,
                                                  const MacFilter& keep)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::vector<ExtractedPacket> out;
    capture::CaptureStream stream(in);
    FrameExtractor ex{options, stats, keep, {}};
    capture::RawFrame frame;
    std::size_t index = 0;
    while (stream.next(frame))
        ex.step(frame, stream.header().link_type, index++, out);
    if (stream.truncation())
        ++stats.truncated_files;
    return out;
}

// ---------------------------------------------------------------------------

namespace {

bool valid_label(std::string_view name)
{
    return !name.empty() && name.find_first_of(",\t\r\n") == std::string_view::npos;
}

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line, char sep)
{
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        parts.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return parts;
}

} // namespace

DeviceRegistry DeviceRegistry::parse(std::string_view text)
{
    DeviceRegistry registry;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos)
            end = text.size();
        const std::string_view line = trim(text.substr(start, end - start));
        ++line_no;
        start = end + 1;
        if (line.empty() || line.front() == '#')
            continue;
        const auto fields = split(line, '\t');
        const auto where = "line " + std::to_string(line_no);
        if (fields.size() != 3)
            throw Error(ErrorCode::InvalidRegistry, where + ": expected mac<TAB>name<TAB>type");
        const auto mac = MacAddress::parse(fields[0]);
        if (!mac || mac->to_string() != fields[0])
            throw Error(ErrorCode::InvalidRegistry,
                        where + ": MAC must be lowercase colon-hex, got '" + std::string(fields[0]) + "'");
        const auto type = parse_device_type(fields[2]);
        if (!type)
            throw Error(ErrorCode::InvalidRegistry,
                        where + ": device type must be iot or non-iot, got '" + std::string(fields[2]) + "'");
        try {
            registry.add(*mac, {std::string(fields[1]), *type});
        } catch (const Error& e) {
            throw Error(ErrorCode::InvalidRegistry, where + ": " + e.what());
        }
    }
    return registry;
}

DeviceRegistry DeviceRegistry::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::Io, "cannot open registry " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
}

void DeviceRegistry::add(const MacAddress& mac, DeviceInfo info)
{
    if (!valid_label(info.name))
        throw Error(ErrorCode::InvalidRegistry, "device name '" + info.name + "' is empty or contains , TAB or newline");
    if (entries_.count(mac))
        throw Error(ErrorCode::InvalidRegistry, "duplicate MAC " + mac.to_string());
    if (const auto existing = type_of(info.name); existing && *existing != info.type)
        throw Error(ErrorCode::InvalidRegistry, "device '" + info.name + "' registered with two types");
    entries_.emplace(mac, std::move(info));
}

const DeviceInfo* DeviceRegistry::lookup(const MacAddress& mac) const
{
    const auto it = entries_.find(mac);
    return it == entries_.end() ? nullptr : &it->second;
}

std::optional<DeviceType> DeviceRegistry::type_of(const std::string& name) const
{
    for (const auto& [mac, info] : entries_)
        if (info.name == name)
            return info.type;
    return std::nullopt;
}

LabelResult label_by_source_mac(const std::vector<ExtractedPacket>& packets,
                                const DeviceRegistry& registry, ClassAttribute class_attribute)
{
    if (registry.empty())
        throw Error(ErrorCode::EmptyRegistry, "device registry has no entries");
    LabelResult result{Dataset(canonical_schema(), class_attribute), 0, 0};
    for (const auto& packet : packets) {
        const DeviceInfo* info = registry.lookup(packet.src_mac);
        if (!info) {
            ++result.dropped_unregistered;
            continue;
        }
        const auto cells = packet.features.cells();
        result.dataset.add_row(cells, class_attribute == ClassAttribute::device_name
                                          ? info->name
                                          : std::string(to_string(info->type)));
        ++result.kept;
    }
    return result;
}

Dataset relabel_by_type(const Dataset& dataset, const DeviceRegistry& registry)
{
    Dataset out(dataset.attributes(), ClassAttribute::device_type);
    for (std::size_t r = 0; r < dataset.size(); ++r) {
        std::optional<std::string> label;
        if (const std::string* name = dataset.label_name(r)) {
            if (auto type = parse_device_type(*name))
                label = std::string(to_string(*type));
            else if (auto reg = registry.type_of(*name))
                label = std::string(to_string(*reg));
            else
                throw Error(ErrorCode::UnknownClass, "device '" + *name + "' is not in the registry");
        }
        out.add_row(dataset.row(r), label);
    }
    return out;
}

CleanResult clean(const Dataset& dataset, bool dedup)
{
    CleanResult result{Dataset(dataset.attributes(), dataset.class_attribute()), 0, 0};
    std::set<std::pair<std::vector<Cell>, std::string>> seen;
    for (std::size_t r = 0; r < dataset.size(); ++r) {
        const auto row = dataset.row(r);
        if (std::none_of(row.begin(), row.end(), [](const Cell& c) { return c.has_value(); })) {
            ++result.empty_rows_removed;
            continue;
        }
        const std::string* label = dataset.label_name(r);
        if (dedup) {
            // '\n' can never be part of a label, so it marks "unlabeled" unambiguously.
            auto key = std::make_pair(std::vector<Cell>(row.begin(), row.end()),
                                      label ? *label : std::string("\n"));
            if (!seen.insert(std::move(key)).second) {
                ++result.duplicates_removed;
                continue;
            }
        }
        result.dataset.add_row(row, label ? std::optional<std::string>(*label) : std::nullopt);
    }
    return result;
}

// ---------------------------------------------------------------------------

std::string format_number(double value)
{
    char buf[64];
    if (std::nearbyint(value) == value && std::fabs(value) < 9.0e15) {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, static_cast<long long>(value));
        return std::string(buf, ptr);
    }
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

void write_csv(const Dataset& dataset, std::ostream& out)
{
    if (dataset.attributes() != canonical_schema())
        throw Error(ErrorCode::HeaderMismatch, "dataset schema is not the canonical 9-feature schema");
    out << kCsvHeader << '\n';
    for (std::size_t r = 0; r < dataset.size(); ++r) {
        for (const Cell& cell : dataset.row(r)) {
            if (cell)
                out << format_number(*cell);
            out << ',';
        }
        if (const std::string* label = dataset.label_name(r)) {
            if (!valid_label(*label))
                throw Error(ErrorCode::InvalidLabel, "label '" + *label + "' cannot be written to CSV");
            out << *label;
        }
        out << '\n';
    }
}

std::string write_csv(const Dataset& dataset)
{
    std::ostringstream out;
    write_csv(dataset, out);
    return out.str();
}

void write_csv_file(const Dataset& dataset, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::Io, "cannot write " + path.string());
    write_csv(dataset, out);
}

Dataset read_csv(std::istream& in, ClassAttribute class_attribute)
{
    std::string line;
    if (!std::getline(in, line) || trim(line) != kCsvHeader)
        throw Error(ErrorCode::HeaderMismatch, "expected header '" + std::string(kCsvHeader) + "'");
    Dataset dataset(canonical_schema(), class_attribute);
    std::array<Cell, kFeatureCount> cells;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        std::string_view view = line;
        if (!view.empty() && view.back() == '\r')
            view.remove_suffix(1);
        if (view.empty())
            continue;
        const auto fields = split(view, ',');
        if (fields.size() != kFeatureCount + 1)
            throw Error(ErrorCode::RaggedRow, "row " + std::to_string(row) + " has " +
                                                  std::to_string(fields.size()) + " fields, expected " +
                                                  std::to_string(kFeatureCount + 1));
        for (std::size_t c = 0; c < kFeatureCount; ++c) {
            const std::string_view f = fields[c];
            if (f.empty()) {
                cells[c] = std::nullopt;
                continue;
            }
            double value = 0;
            auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), value);
            if (ec != std::errc{} || ptr != f.data() + f.size() || !std::isfinite(value) || value < 0)
                throw Error(ErrorCode::NonNumericCell, "row " + std::to_string(row) + ", column " +
                                                           kFeatureNames[c] + ": '" + std::string(f) + "'");
            cells[c] = value;
        }
        const std::string_view label = fields[kFeatureCount];
        dataset.add_row(cells, label.empty() ? std::nullopt : std::optional<std::string>(label));
        ++row;
    }
    return dataset;
}

Dataset read_csv(std::string_view text, ClassAttribute class_attribute)
{
    std::istringstream in{std::string(text)};
    return read_csv(in, class_attribute);
}

Dataset read_csv_file(const std::filesystem::path& path, ClassAttribute class_attribute)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::Io, "cannot open " + path.string());
    return read_csv(in, class_attribute);
}

} // namespace devfp::features
