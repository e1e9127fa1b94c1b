#pragma once

// Command-line front end: extract, rank, train-eval, classify and pipeline.

#include "devfp/classifiers.hpp"
#include "devfp/dataset.hpp"
#include "devfp/evaluation.hpp"
#include "devfp/features.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace devfp::cli {

inline constexpr std::string_view kVersion = "devfp 1.0.0";

enum class InputMode { pcap, csv };

struct RunConfig {
    std::vector<std::filesystem::path> inputs;
    InputMode mode = InputMode::pcap;
    std::optional<std::filesystem::path> registry;
    evaluation::FeatureSet feature_set = evaluation::FeatureSet::combined;
    ClassAttribute classes = ClassAttribute::device_name;
    classifiers::ModelKind model = classifiers::ModelKind::j48;
    classifiers::Hyperparams hyperparams;
    evaluation::SplitSpec split;
    std::optional<std::filesystem::path> out;
    bool dedup = false;
    bool raw_ack = false;
    unsigned threads = 0; // capture readers and ensemble members; 0 = hardware concurrency
};

/// Thrown for bad flag combinations; the driver maps it to exit status 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// .csv inputs are datasets, anything else a capture. Throws UsageError when mixed or empty.
InputMode detect_mode(std::span<const std::filesystem::path> inputs);

struct ExtractSummary {
    features::ExtractStats stats;
    std::size_t labeled = 0;
    std::size_t dropped_unregistered = 0;
    std::size_t empty_rows_removed = 0;
    std::size_t duplicates_removed = 0;
};

/// Captures are extracted in parallel and concatenated in input order.
/// With a registry only registered sources are kept (and labeled).
std::vector<features::ExtractedPacket> extract_files(std::span<const std::filesystem::path> paths,
                                                     const features::ExtractOptions& options,
                                                     unsigned threads, features::ExtractStats& stats,
                                                     const features::DeviceRegistry* registry = nullptr);

/// Labeled, cleaned dataset from either input mode; device_type labels come from the registry.
Dataset load_dataset(const RunConfig& config, ExtractSummary& summary);

// Each command writes machine-readable results to files or `out`, and progress to `err`.
void cmd_extract(const RunConfig& config, std::ostream& out, std::ostream& err);
void cmd_rank(const RunConfig& config, const std::optional<std::filesystem::path>& meta, std::ostream& out,
              std::ostream& err);
/// Writes model.txt, report.txt, per_class.csv, summary.csv and confusion.csv into config.out.
evaluation::EvalReport cmd_train_eval(const RunConfig& config, std::ostream& out, std::ostream& err);
void cmd_classify(const RunConfig& config, const std::filesystem::path& model_file,
                  const std::optional<std::filesystem::path>& summary_path, std::ostream& out, std::ostream& err);
/// extract -> rank -> train-eval, everything written into config.out.
void cmd_pipeline(const RunConfig& config, std::ostream& out, std::ostream& err);

struct DeviceVote {
    std::string predicted_class;
    double confidence = 0; // votes for the winner / packets
    std::size_t packets = 0;
};

/// Majority class per key; ties go to the lower class index.
DeviceVote majority(std::span<const std::size_t> predictions, const std::vector<std::string>& class_names);

/// Parses `args` (without the program name) and runs one command.
/// Exit status: 0 success, 1 runtime error, 2 usage error.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

} // namespace devfp::cli
