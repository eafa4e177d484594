// paf_lab: train, probe, compare and benchmark series vs parallel
// attention/FFN transformer layers.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "paflab/commands.hpp"

namespace {

std::optional<std::size_t> env_threads() {
    const char* v = std::getenv("PAF_LAB_THREADS");
    if (v == nullptr || *v == '\0') {
        return std::nullopt;
    }
    char* end = nullptr;
    const unsigned long long n = std::strtoull(v, &end, 10);
    if (*end != '\0' || n == 0) {
        std::cerr << "warning: ignoring PAF_LAB_THREADS='" << v << "'\n";
        return std::nullopt;
    }
    return static_cast<std::size_t>(n);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Series vs parallel attention/FFN transformer lab"};
    app.require_subcommand(1);

    paflab::CommandOptions opts;
    std::string config, out, checkpoint, modes;
    std::uint64_t seed = 0;
    std::size_t threads = 0, repeats = 0;

    const auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "JSON config file");
        sub->add_option("--out", out, "Output path");
        sub->add_option("--seed", seed, "Seed override");
        sub->add_option("--threads", threads, "Worker threads (default: $PAF_LAB_THREADS or 1)")
            ->check(CLI::PositiveNumber);
    };

    CLI::App* train = app.add_subcommand("train", "Train a model and write a checkpoint (--out)");
    common(train);
    CLI::App* probe = app.add_subcommand("probe", "Isotropy and residual-norm trace of a checkpoint");
    common(probe);
    probe->add_option("checkpoint,--checkpoint", checkpoint, "Checkpoint file")->required();
    CLI::App* bench = app.add_subcommand("bench", "Time SAF, sequential PAF and concurrent PAF layer stacks");
    common(bench);
    bench->add_option("--repeats", repeats, "Timed repeats per mode (>= 30)");
    bench->add_option("--mode", modes, "Comma-separated modes: saf,paf-seq,paf-par");
    CLI::App* compare = app.add_subcommand("compare", "SAF, transplanted PAF and NoFFN pipeline with criteria");
    common(compare);
    CLI::App* grad = app.add_subcommand("grad-check", "Analytic vs finite-difference gradients");
    common(grad);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : paflab::kExitConfig;
    }

    CLI::App* sub = app.get_subcommands().front();
    if (!config.empty()) {
        opts.config = config;
    }
    if (!out.empty()) {
        opts.out = out;
    }
    if (!checkpoint.empty()) {
        opts.checkpoint = checkpoint;
    }
    if (sub->count("--seed") > 0) {
        opts.seed = seed;
    }
    if (sub->count("--threads") > 0) {
        opts.threads = threads;
    } else {
        opts.threads = env_threads();
    }
    if (sub == bench && bench->count("--repeats") > 0) {
        opts.repeats = repeats;
    }
    if (!modes.empty()) {
        opts.modes = modes;
    }
    return paflab::run_command(sub->get_name(), opts, std::cout, std::cerr);
}
