// nadyn: run surface-hopping, QCLE and exact wavepacket experiments from a
// configuration file.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "nadyn/harness/run.hpp"

namespace {

constexpr int exit_config_error = 2;
constexpr int exit_engine_error = 3;

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw nadyn::ConfigError(path, "cannot read configuration file");
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nonadiabatic dynamics: FSSH, QCLE surface hopping and exact wavepackets"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run an experiment described by a configuration file");
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> ntraj;
    std::optional<std::string> out_dir;
    std::optional<std::string> method;
    std::optional<int> workers;
    bool print_config = false;
    run->add_option("config", config_path, "Configuration file")->required();
    run->add_option("--seed", seed, "Override seed");
    run->add_option("--ntraj", ntraj, "Override n_traj");
    run->add_option("--out", out_dir, "Override output.dir");
    run->add_option("--method", method, "Override method")
        ->check(CLI::IsMember({"fssh", "qcle", "oracle", "compare"}));
    run->add_option("--workers", workers, "Override workers");
    run->add_flag("--print-config", print_config, "Print the canonical configuration before running");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config_error;
    }

    nadyn::RunConfig cfg;
    try {
        cfg = nadyn::parse_config(read_file(config_path));
        if (seed) cfg.seed = *seed;
        if (ntraj) cfg.n_traj = *ntraj;
        if (out_dir) cfg.out_dir = *out_dir;
        if (method) cfg.method = *nadyn::parse_method(*method);
        if (workers) cfg.workers = *workers;
        cfg.validate();
        nadyn::validate_initial(cfg);
    } catch (const nadyn::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config_error;
    }
    if (print_config) std::cout << nadyn::emit_config(cfg);

    try {
        const auto out = nadyn::run(cfg);
        for (const auto& f : out.files) std::cout << "wrote " << f.string() << '\n';
    } catch (const nadyn::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config_error;
    } catch (const std::exception& e) {
        std::cerr << "engine error: " << e.what() << '\n';
        return exit_engine_error;
    }
    return 0;
}
