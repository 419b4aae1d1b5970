#pragma once

#include <string>
#include <vector>

#include "hybridctl/learner.hpp"

namespace hybridctl {

// JSON config loading with strict schema: unknown keys are rejected at every
// level, every field validated before any run starts.
RunConfig config_from_json_text(const std::string& text);
RunConfig load_config_file(const std::string& path);

struct SeedRun {
    std::uint64_t seed;
    std::vector<EpisodeLog> logs;
};

// Per-seed curve_seed<N>.csv files plus summary.json (per-episode mean/std
// across seeds and the resolved config). Wall-clock timings go to
// run_meta.json only, so curve files are byte-stable across reruns.
void write_outputs(const RunConfig& cfg, const std::vector<SeedRun>& runs,
                   const std::string& out_dir);

// Runs every seed in cfg (parallel workers capped by HYBRIDCTL_THREADS,
// 0 = auto) and returns the logs in seed order.
std::vector<SeedRun> run_all_seeds(const RunConfig& cfg);

int worker_count_from_env(std::size_t num_seeds);

}  // namespace hybridctl
