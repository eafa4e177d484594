#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

namespace paflab {

/// Process exit codes, one per failure class.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfig = 2,
    kExitIo = 3,
    kExitCorrupt = 4,
    kExitAcceptance = 5,
};

struct CommandOptions {
    std::optional<std::filesystem::path> config;
    std::optional<std::filesystem::path> out;
    std::optional<std::filesystem::path> checkpoint;
    /// Root seed (probe: probe-batch seed). Overrides the config.
    std::optional<std::uint64_t> seed;
    /// Worker threads; when unset, bench uses its config and the rest use 1.
    std::optional<std::size_t> threads;
    std::optional<std::size_t> repeats;
    /// Comma-separated bench modes.
    std::optional<std::string> modes;
};

/// `path` with its extension replaced by `suffix` (e.g. ".report.json").
std::filesystem::path sidecar_path(const std::filesystem::path& path, std::string_view suffix);

/// Each command writes a human summary to `out`, diagnostics to `err`, and
/// throws on failure; run_command maps exceptions to exit codes.
int cmd_train(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_probe(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_bench(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_compare(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_grad_check(const CommandOptions& opts, std::ostream& out, std::ostream& err);

/// Dispatches by name ("train", "probe", "bench", "compare", "grad-check")
/// and converts exceptions into the exit-code map.
int run_command(std::string_view name, const CommandOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace paflab
