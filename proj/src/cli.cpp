#include "devfp/cli.hpp"

#include "devfp/error.hpp"
#include "devfp/selection.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <ostream>
#include <thread>

namespace devfp::cli {

namespace fs = std::filesystem;
using features::DeviceRegistry;
using features::ExtractedPacket;
using features::ExtractStats;

InputMode detect_mode(std::span<const fs::path> inputs)
{
    if (inputs.empty())
        throw UsageError("no --input given");
    const auto is_csv = [](const fs::path& p) {
        auto ext = p.extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        return ext == ".csv";
    };
    const auto csv = static_cast<std::size_t>(std::count_if(inputs.begin(), inputs.end(), is_csv));
    if (csv != 0 && csv != inputs.size())
        throw UsageError("--input mixes CSV datasets and captures; pass one kind per run");
    return csv ? InputMode::csv : InputMode::pcap;
}

std::vector<ExtractedPacket> extract_files(std::span<const fs::path> paths, const features::ExtractOptions& options,
                                           unsigned threads, ExtractStats& stats, const DeviceRegistry* registry)
{
    const std::size_t n = paths.size();
    std::vector<std::vector<ExtractedPacket>> parts(n);
    std::vector<ExtractStats> part_stats(n);
    std::vector<std::exception_ptr> errors(n);
    features::MacFilter keep;
    if (registry)
        keep = [registry](const MacAddress& mac) { return registry->lookup(mac) != nullptr; };

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                parts[i] = features::extract_capture_file(paths[i], options, part_stats[i], keep);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    unsigned workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 1; t < workers; ++t)
            pool.emplace_back(worker);
        worker();
    }
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);

    std::vector<ExtractedPacket> all;
    for (std::size_t i = 0; i < n; ++i) {
        stats += part_stats[i];
        all.insert(all.end(), std::make_move_iterator(parts[i].begin()), std::make_move_iterator(parts[i].end()));
    }
    return all;
}

namespace {

std::ofstream open_out(const fs::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::Io, "cannot write " + path.string());
    return out;
}

DeviceRegistry load_registry(const RunConfig& config)
{
    if (!config.registry)
        return {};
    return DeviceRegistry::load(*config.registry);
}

// Appends rows by label name so differently interned inputs merge correctly.
void append(Dataset& into, const Dataset& from)
{
    for (std::size_t r = 0; r < from.size(); ++r) {
        const std::string* label = from.label_name(r);
        into.add_row(from.row(r), label ? std::optional<std::string>(*label) : std::nullopt);
    }
}

Dataset read_csv_inputs(std::span<const fs::path> paths)
{
    Dataset all(features::canonical_schema());
    for (const auto& p : paths)
        append(all, features::read_csv_file(p));
    return all;
}

void print_summary(const ExtractSummary& s, bool from_captures, std::ostream& err)
{
    if (from_captures) {
        const auto& st = s.stats;
        err << "frames " << st.frames << ", ipv4 " << st.ipv4_packets << ", skipped non-ipv4 " << st.skipped_non_ipv4
            << ", malformed " << st.skipped_malformed << ", fragments " << st.skipped_fragments
            << ", truncated frames " << st.truncated_frames << ", truncated files " << st.truncated_files
            << ", raw-ack fallbacks " << st.raw_ack_fallbacks << '\n';
        err << "labeled " << s.labeled << ", unregistered dropped " << s.dropped_unregistered << '\n';
    }
    err << "empty rows removed " << s.empty_rows_removed << ", duplicates removed " << s.duplicates_removed << '\n';
}

std::string fixed6(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

const fs::path& require_out(const RunConfig& config, std::string_view command)
{
    if (!config.out)
        throw UsageError(std::string(command) + " needs --out <directory>");
    fs::create_directories(*config.out);
    return *config.out;
}

evaluation::EvalReport train_eval_on(const Dataset& dataset, const RunConfig& config, const fs::path& dir,
                                     std::ostream& out, std::ostream& err)
{
    auto hp = config.hyperparams;
    hp.seed = config.split.seed;
    const unsigned threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
    auto result = evaluation::ablation_run(dataset, config.feature_set, config.model, hp, config.split, threads);

    classifiers::save_model_file(result.model, dir / "model.txt");
    {
        auto f = open_out(dir / "report.txt");
        f << kVersion << '\n' << dataset.size() << " rows, " << dataset.class_count() << " classes, split "
          << config.split.train_fraction << (config.split.stratified ? " stratified" : "") << '\n';
        evaluation::write_text_report(result.report, f);
    }
    {
        auto f = open_out(dir / "per_class.csv");
        evaluation::write_per_class_csv(result.report, f);
    }
    {
        auto f = open_out(dir / "summary.csv");
        evaluation::write_summary_csv(result.report, f);
    }
    {
        auto f = open_out(dir / "confusion.csv");
        evaluation::write_confusion_csv(result.report, f);
    }
    evaluation::write_text_report(result.report, err);
    out << "acc=" << fixed6(result.report.accuracy) << " macro_pre=" << fixed6(result.report.macro_precision) << '\n';
    return result.report;
}

void rank_on(const Dataset& dataset, const RunConfig& config, const std::optional<fs::path>& meta,
             std::ostream& rank_out, std::ostream& err)
{
    const auto columns = evaluation::feature_columns(config.feature_set);
    const auto ranked = selection::rank(dataset.project(columns));
    selection::write_rank_report(ranked, rank_out);
    if (meta) {
        const auto selected = selection::apply_criteria(ranked, selection::MetaRegistry::load(*meta));
        err << "selected:";
        for (const auto& name : selected)
            err << ' ' << name;
        err << '\n';
    }
}

} // namespace

Dataset load_dataset(const RunConfig& config, ExtractSummary& summary)
{
    Dataset labeled;
    if (config.mode == InputMode::pcap) {
        if (!config.registry)
            throw UsageError("capture input needs --registry");
        const auto registry = load_registry(config);
        if (registry.empty())
            throw Error(ErrorCode::EmptyRegistry, config.registry->string() + " registers no devices");
        const auto packets =
            extract_files(config.inputs, {config.raw_ack}, config.threads, summary.stats, &registry);
        auto result = features::label_by_source_mac(packets, registry, config.classes);
        // Unregistered sources were filtered during extraction.
        summary.dropped_unregistered = summary.stats.ipv4_packets - result.kept;
        summary.labeled = result.kept;
        labeled = std::move(result.dataset);
    } else {
        labeled = read_csv_inputs(config.inputs);
        if (config.classes == ClassAttribute::device_type)
            labeled = features::relabel_by_type(labeled, load_registry(config));
    }
    auto cleaned = features::clean(labeled, config.dedup);
    summary.empty_rows_removed = cleaned.empty_rows_removed;
    summary.duplicates_removed = cleaned.duplicates_removed;
    return std::move(cleaned.dataset);
}

void cmd_extract(const RunConfig& config, std::ostream& out, std::ostream& err)
{
    if (config.mode != InputMode::pcap)
        throw UsageError("extract reads captures, not CSV");
    ExtractSummary summary;
    const Dataset dataset = load_dataset(config, summary);
    if (config.out) {
        features::write_csv_file(dataset, *config.out);
    } else {
        features::write_csv(dataset, out);
    }
    print_summary(summary, true, err);
    err << dataset.size() << " rows written\n";
    if (summary.labeled == 0)
        err << "warning: no packet came from a registered MAC address\n";
}

void cmd_rank(const RunConfig& config, const std::optional<fs::path>& meta, std::ostream& out, std::ostream& err)
{
    ExtractSummary summary;
    const Dataset dataset = load_dataset(config, summary);
    if (config.out) {
        auto f = open_out(*config.out);
        rank_on(dataset, config, meta, f, err);
    } else {
        rank_on(dataset, config, meta, out, err);
    }
}

evaluation::EvalReport cmd_train_eval(const RunConfig& config, std::ostream& out, std::ostream& err)
{
    const auto& dir = require_out(config, "train-eval");
    ExtractSummary summary;
    const Dataset dataset = load_dataset(config, summary);
    print_summary(summary, config.mode == InputMode::pcap, err);
    return train_eval_on(dataset, config, dir, out, err);
}

void cmd_pipeline(const RunConfig& config, std::ostream& out, std::ostream& err)
{
    const auto& dir = require_out(config, "pipeline");
    ExtractSummary summary;
    const Dataset dataset = load_dataset(config, summary);
    print_summary(summary, config.mode == InputMode::pcap, err);
    features::write_csv_file(dataset, dir / "dataset.csv");
    {
        auto f = open_out(dir / "rank.csv");
        rank_on(dataset, config, std::nullopt, f, err);
    }
    train_eval_on(dataset, config, dir, out, err);
}

DeviceVote majority(std::span<const std::size_t> predictions, const std::vector<std::string>& class_names)
{
    std::vector<std::size_t> votes(class_names.size(), 0);
    for (auto p : predictions)
        ++votes.at(p);
    const auto best = static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    DeviceVote v;
    v.packets = predictions.size();
    if (v.packets == 0)
        return v;
    v.predicted_class = class_names[best];
    v.confidence = static_cast<double>(votes[best]) / static_cast<double>(v.packets);
    return v;
}

void cmd_classify(const RunConfig& config, const fs::path& model_file, const std::optional<fs::path>& summary_path,
                  std::ostream& out, std::ostream& err)
{
    const auto model = classifiers::load_model_file(model_file);
    Dataset rows(features::canonical_schema());
    std::vector<MacAddress> sources;
    if (config.mode == InputMode::csv) {
        rows = read_csv_inputs(config.inputs);
    } else {
        ExtractStats stats;
        const auto packets = extract_files(config.inputs, {config.raw_ack}, config.threads, stats);
        for (const auto& p : packets) {
            const auto cells = p.features.cells();
            rows.add_row(cells, std::nullopt);
            sources.push_back(p.src_mac);
        }
        err << "frames " << stats.frames << ", ipv4 " << stats.ipv4_packets << '\n';
    }
    const Dataset projected = rows.project(model.schema());

    std::optional<std::ofstream> file;
    if (config.out)
        file = open_out(*config.out);
    std::ostream& pred_out = file ? *file : out;
    pred_out << "row,predicted_class,confidence\n";
    std::vector<std::size_t> predictions(projected.size());
    for (std::size_t r = 0; r < projected.size(); ++r) {
        const auto dist = model.predict_proba(projected.row(r));
        predictions[r] = classifiers::argmax(dist);
        pred_out << r << ',' << model.class_names()[predictions[r]] << ',' << fixed6(dist[predictions[r]]) << '\n';
    }
    err << projected.size() << " rows classified\n";

    if (config.mode != InputMode::pcap)
        return;
    std::map<MacAddress, std::vector<std::size_t>> by_source;
    for (std::size_t r = 0; r < predictions.size(); ++r)
        by_source[sources[r]].push_back(predictions[r]);
    std::optional<std::ofstream> summary_file;
    if (summary_path)
        summary_file = open_out(*summary_path);
    std::ostream& s = summary_file ? *summary_file : err;
    s << "mac,predicted_class,confidence,packets\n";
    for (const auto& [mac, preds] : by_source) {
        const auto vote = majority(preds, model.class_names());
        s << mac.to_string() << ',' << vote.predicted_class << ',' << fixed6(vote.confidence) << ',' << vote.packets
          << '\n';
    }
}

// ---------------------------------------------------------------------------

namespace {

struct Flags {
    std::vector<std::string> inputs;
    std::string registry;
    std::string model = "j48";
    std::string features = "combined";
    std::string classes = "device_name";
    double split = 0.8;
    std::uint64_t seed = 1;
    bool dedup = false;
    bool raw_ack = false;
    std::string out;
    unsigned threads = 0;
    std::string meta;
    std::string model_file;
    std::string summary;
    // hyperparameters
    std::size_t trees = 100;
    std::size_t bagging_rounds = 10;
    std::size_t min_leaf = 2;
    double confidence = 0.25;
    bool no_prune = false;
    bool no_stratify = false;
    std::size_t rt_features = 0;
    std::vector<std::string> vote_members = {"j48", "bagging"};
};

void add_input_flags(CLI::App& sub, Flags& f)
{
    sub.add_option("-i,--input", f.inputs, "pcap captures or CSV datasets (not mixed)")->required();
    sub.add_option("--registry", f.registry, "MAC registry: mac<TAB>name<TAB>iot|non-iot");
    sub.add_option("--classes", f.classes, "class column")->check(CLI::IsMember({"device_name", "device_type"}));
    sub.add_flag("--dedup", f.dedup, "drop duplicate rows");
    sub.add_flag("--raw-ack", f.raw_ack, "use raw ack numbers instead of relative ones");
    sub.add_option("--threads", f.threads, "worker threads for capture reading and ensembles (0 = auto)");
}

void add_model_flags(CLI::App& sub, Flags& f)
{
    sub.add_option("--model", f.model)->check(CLI::IsMember({"j48", "rf", "rt", "nb", "bagging", "vote"}));
    sub.add_option("--split", f.split, "training fraction");
    sub.add_option("--seed", f.seed, "seed for every random choice");
    sub.add_flag("--no-stratify", f.no_stratify, "split over all rows instead of per class");
    sub.add_option("--trees", f.trees, "random forest size");
    sub.add_option("--bagging-rounds", f.bagging_rounds);
    sub.add_option("--min-leaf", f.min_leaf, "C4.5 minimum rows per leaf");
    sub.add_option("--confidence", f.confidence, "C4.5 pruning confidence");
    sub.add_flag("--no-prune", f.no_prune);
    sub.add_option("--rt-features", f.rt_features, "random tree candidates per node (0 = log2(k)+1)");
    sub.add_option("--vote-members", f.vote_members)->delimiter(',');
}

void add_feature_flag(CLI::App& sub, Flags& f)
{
    sub.add_option("--features", f.features)->check(CLI::IsMember({"network", "transport", "combined"}));
}

RunConfig to_config(const Flags& f)
{
    RunConfig c;
    c.inputs.assign(f.inputs.begin(), f.inputs.end());
    c.mode = detect_mode(c.inputs);
    if (!f.registry.empty())
        c.registry = f.registry;
    c.feature_set = *evaluation::parse_feature_set(f.features);
    c.classes = f.classes == "device_type" ? ClassAttribute::device_type : ClassAttribute::device_name;
    c.model = *classifiers::parse_model_kind(f.model);
    auto& hp = c.hyperparams;
    hp.seed = f.seed;
    hp.forest_trees = f.trees;
    hp.bagging_rounds = f.bagging_rounds;
    hp.c45_min_leaf = f.min_leaf;
    hp.c45_confidence = f.confidence;
    hp.c45_prune = !f.no_prune;
    if (f.rt_features)
        hp.rt_feature_count = f.rt_features;
    hp.vote_members.clear();
    for (const auto& m : f.vote_members) {
        const auto kind = classifiers::parse_model_kind(m);
        if (!kind)
            throw UsageError("unknown vote member '" + m + "'");
        hp.vote_members.push_back(*kind);
    }
    hp.validate();
    c.split = {f.split, f.seed, !f.no_stratify};
    if (!f.out.empty())
        c.out = f.out;
    c.dedup = f.dedup;
    c.raw_ack = f.raw_ack;
    c.threads = f.threads;
    return c;
}

} // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Device fingerprinting from packet headers", "devfp"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);
    Flags f;

    auto* extract = app.add_subcommand("extract", "captures -> labeled feature CSV");
    add_input_flags(*extract, f);
    extract->add_option("-o,--out", f.out, "CSV path (default: standard output)");

    auto* rank = app.add_subcommand("rank", "gain-ratio ranking of the feature columns");
    add_input_flags(*rank, f);
    add_feature_flag(*rank, f);
    rank->add_option("-o,--out", f.out, "rank CSV path (default: standard output)");
    rank->add_option("--meta", f.meta, "attribute flags; prints the selected subset");

    auto* train_eval = app.add_subcommand("train-eval", "split, train, evaluate, save model and reports");
    add_input_flags(*train_eval, f);
    add_feature_flag(*train_eval, f);
    add_model_flags(*train_eval, f);
    train_eval->add_option("-o,--out", f.out, "output directory")->required();

    auto* classify = app.add_subcommand("classify", "predict classes with a saved model");
    classify->add_option("-i,--input", f.inputs, "pcap captures or CSV datasets")->required();
    classify->add_option("--model-file", f.model_file)->required();
    classify->add_option("-o,--out", f.out, "prediction CSV path (default: standard output)");
    classify->add_option("--summary", f.summary, "per-MAC majority CSV for captures (default: standard error)");
    classify->add_flag("--raw-ack", f.raw_ack);
    classify->add_option("--threads", f.threads);

    auto* pipeline = app.add_subcommand("pipeline", "extract, rank and train-eval into one directory");
    add_input_flags(*pipeline, f);
    add_feature_flag(*pipeline, f);
    add_model_flags(*pipeline, f);
    pipeline->add_option("-o,--out", f.out, "output directory")->required();

    try {
        // CLI11 consumes arguments from the back.
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        const RunConfig config = to_config(f);
        if (*extract)
            cmd_extract(config, out, err);
        else if (*rank)
            cmd_rank(config, f.meta.empty() ? std::nullopt : std::optional<fs::path>(f.meta), out, err);
        else if (*train_eval)
            cmd_train_eval(config, out, err);
        else if (*classify)
            cmd_classify(config, f.model_file, f.summary.empty() ? std::nullopt : std::optional<fs::path>(f.summary),
                         out, err);
        else if (*pipeline)
            cmd_pipeline(config, out, err);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

} // namespace devfp::cli
