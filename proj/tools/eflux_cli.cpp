#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "eflux/errors.hpp"
#include "eflux/experiment.hpp"

namespace {

int report(const eflux::ErrorCode& code, const std::string& message)
{
    std::cerr << "EFLUX:" << code.tag << ": " << message << '\n';
    return code.exit_code;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Monte Carlo and quadrature experiments for conservation laws with random data"};
    std::string command;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
    std::optional<unsigned> threads;
    std::optional<std::string> outdir;
    bool print_config = false;

    app.add_option("subcommand", command, "one of: sample-path solve scan segment-probs cdf "
                                          "shock-density spectrum variance-law converge fd-compare")
        ->required()
        ->check(CLI::IsMember(eflux::subcommands()));
    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "master seed (overrides run.seed)");
    app.add_option("--trials", trials, "Monte Carlo trials or seeds (overrides run.trials)")
        ->check(CLI::PositiveNumber);
    app.add_option("--threads", threads, "worker threads, 0 for all cores");
    app.add_option("--outdir", outdir, "output directory (overrides run.outdir)");
    app.add_flag("--print-config", print_config,
                 "print the effective configuration and exit without running");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report({2, "CONFIG"}, e.what());
    }

    try {
        eflux::RunConfig config =
            config_path.empty() ? eflux::parse_config("{}") : eflux::load_config(config_path);
        if (seed)
            config.run.seed = *seed;
        if (trials)
            config.run.trials = *trials;
        if (threads)
            config.run.threads = *threads;
        if (outdir)
            config.run.outdir = *outdir;
        if (print_config) {
            std::cout << eflux::serialize_config(config);
            return 0;
        }
        eflux::execute(command, config);
    } catch (const std::exception& e) {
        return report(eflux::classify_error(e), e.what());
    }
    return 0;
}
