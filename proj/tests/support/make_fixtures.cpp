// Writes the synthetic fixture corpus and the sample-row capture to a directory,
// for trying the command-line tool without real traffic.

#include "support/fixtures.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

int main(int argc, char** argv)
{
    if (argc < 2) {
        std::cerr << "usage: make_fixtures <dir> [seed] [packets-per-device]\n";
        return 2;
    }
    const std::filesystem::path dir = argv[1];
    const std::uint64_t seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 1;
    const std::size_t per_device = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 200;

    const auto corpus = devfp::testing::synthetic_corpus(seed, per_device);
    for (const auto& p : devfp::testing::write_corpus(corpus, dir))
        std::cout << p.string() << '\n';

    devfp::capture::write_capture_file(devfp::testing::table2_capture(), dir / "sample_rows.pcap");
    std::ofstream reg(dir / "sample_rows_registry.tsv");
    const auto registry = devfp::testing::table2_registry();
    for (const auto& [mac, info] : registry.entries())
        reg << mac.to_string() << '\t' << info.name << '\t' << devfp::features::to_string(info.type) << '\n';
    std::cout << (dir / "sample_rows.pcap").string() << '\n';
    return 0;
}
