#pragma once

// Synthetic captures shared by unit tests, the acceptance suite and the fixture generator.

#include "devfp/capture.hpp"
#include "devfp/features.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace devfp::testing {

struct PublishedRow {
    std::string cells;  // the nine feature cells as a CSV fragment
    std::string device;
};

/// Seven sample rows from the IoT Sentinel data, in order.
const std::vector<PublishedRow>& published_rows();

/// Frames arranged so that extraction with table2_registry() yields published_rows().
/// Conversations from unregistered hosts advance the stream counters.
capture::CaptureFile table2_capture();
features::DeviceRegistry table2_registry();

/// Four interleaved bidirectional conversations (three TCP, one UDP). Bit i of `flips`
/// reverses the direction of every packet in conversation i.
capture::CaptureFile stream_capture(unsigned flips = 0);

struct Corpus {
    std::vector<capture::CaptureFile> captures;
    std::string registry_tsv;
};

/// Several IoT and non-IoT devices with distinct but overlapping header habits.
Corpus synthetic_corpus(std::uint64_t seed, std::size_t packets_per_device);

/// Writes capture_<i>.pcap files and registry.tsv; returns the pcap paths.
std::vector<std::filesystem::path> write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

} // namespace devfp::testing
