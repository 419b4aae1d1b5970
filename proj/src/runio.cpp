#include "hybridctl/runio.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

namespace hybridctl {

namespace {

using nlohmann::json;

[[noreturn]] void bad_field(const std::string& where, const std::string& what) {
    throw std::invalid_argument("config field '" + where + "': " + what);
}

void reject_unknown(const json& obj, const std::string& where,
                    std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed) ok |= (it.key() == k);
        if (!ok) bad_field(where.empty() ? it.key() : where + "." + it.key(), "unknown key");
    }
}

int get_pos_int(const json& obj, const char* key, int fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number_integer() || obj[key].get<long>() < 0)
        bad_field(where + "." + key, "expected a non-negative integer");
    return obj[key].get<int>();
}

double get_pos_double(const json& obj, const char* key, double fallback,
                      const std::string& where) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number() || obj[key].get<double>() <= 0.0)
        bad_field(where + "." + key, "expected a positive number");
    return obj[key].get<double>();
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

double column_mean(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

double column_std(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double mu = column_mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - mu) * (x - mu);
    return std::sqrt(s / static_cast<double>(xs.size()));
}

json resolved_config_json(const RunConfig& cfg) {
    json j;
    j["env"] = cfg.env.id == EnvId::Pendulum ? "pendulum" : "cartpole";
    j["algo"] = algorithm_name(cfg.algo);
    j["episodes"] = cfg.episodes;
    j["seeds"] = cfg.seeds;
    j["params"] = {{"H", cfg.horizon},
                   {"K", cfg.samples},
                   {"lambda", cfg.temperature},
                   {"T", cfg.env.episode_len},
                   {"noise_decay", cfg.noise_decay},
                   {"explore_noise", cfg.explore_noise}};
    j["training"] = {{"batch_size", cfg.batch_size},
                     {"reward_lr", cfg.reward_lr},
                     {"model_updates_per_episode", cfg.model_updates_per_episode},
                     {"buffer_capacity", cfg.buffer_capacity},
                     {"model_lr", cfg.model_lr},
                     {"policy_lr", cfg.policy_lr},
                     {"model_hidden", cfg.model_hidden},
                     {"policy_hidden", cfg.policy_hidden},
                     {"rwr_temperature", cfg.rwr_temperature},
                     {"rwr_steps", cfg.rwr_steps},
                     {"rwr_batch", cfg.rwr_batch},
                     {"bc_epochs_per_round", cfg.bc_epochs_per_round}};
    return j;
}

}  // namespace

RunConfig config_from_json_text(const std::string& text) {
    json j = json::parse(text);
    reject_unknown(j, "", {"env", "algo", "episodes", "seeds", "out", "params", "training"});

    RunConfig cfg;
    if (j.contains("env")) cfg.env = EnvSpec::from_name(j["env"].get<std::string>());
    if (j.contains("algo")) cfg.algo = algorithm_from_name(j["algo"].get<std::string>());
    cfg.episodes = get_pos_int(j, "episodes", cfg.episodes, "");
    if (j.contains("seeds")) {
        if (!j["seeds"].is_array() || j["seeds"].empty())
            bad_field("seeds", "expected a non-empty array of integers");
        cfg.seeds.clear();
        for (const auto& s : j["seeds"]) {
            if (!s.is_number_integer()) bad_field("seeds", "expected integers");
            cfg.seeds.push_back(s.get<std::uint64_t>());
        }
    }
    if (j.contains("out")) cfg.out_dir = j["out"].get<std::string>();

    if (j.contains("params")) {
        const json& p = j["params"];
        reject_unknown(p, "params", {"H", "K", "lambda", "T", "noise_decay", "explore_noise"});
        cfg.horizon = get_pos_int(p, "H", cfg.horizon, "params");
        cfg.samples = get_pos_int(p, "K", cfg.samples, "params");
        cfg.temperature = get_pos_double(p, "lambda", cfg.temperature, "params");
        cfg.env.episode_len = get_pos_int(p, "T", cfg.env.episode_len, "params");
        cfg.noise_decay = get_pos_double(p, "noise_decay", cfg.noise_decay, "params");
        if (p.contains("explore_noise")) {
            if (!p["explore_noise"].is_number())
                bad_field("params.explore_noise", "expected a number");
            cfg.explore_noise = p["explore_noise"].get<double>();
        }
        if (cfg.horizon < 1) bad_field("params.H", "must be >= 1");
    }
    if (j.contains("training")) {
        const json& t = j["training"];
        reject_unknown(t, "training",
                       {"batch_size", "model_updates_per_episode", "buffer_capacity",
                        "model_lr", "reward_lr", "policy_lr", "model_hidden",
                        "policy_hidden", "rwr_temperature", "rwr_steps", "rwr_batch",
                        "bc_epochs_per_round"});
        cfg.batch_size = get_pos_int(t, "batch_size", cfg.batch_size, "training");
        cfg.reward_lr = get_pos_double(t, "reward_lr", cfg.reward_lr, "training");
        cfg.model_updates_per_episode =
            get_pos_int(t, "model_updates_per_episode", cfg.model_updates_per_episode,
                        "training");
        cfg.buffer_capacity = static_cast<std::size_t>(get_pos_int(
            t, "buffer_capacity", static_cast<int>(cfg.buffer_capacity), "training"));
        cfg.model_lr = get_pos_double(t, "model_lr", cfg.model_lr, "training");
        cfg.policy_lr = get_pos_double(t, "policy_lr", cfg.policy_lr, "training");
        cfg.model_hidden = get_pos_int(t, "model_hidden", cfg.model_hidden, "training");
        cfg.policy_hidden = get_pos_int(t, "policy_hidden", cfg.policy_hidden, "training");
        cfg.rwr_temperature =
            get_pos_double(t, "rwr_temperature", cfg.rwr_temperature, "training");
        cfg.rwr_steps = get_pos_int(t, "rwr_steps", cfg.rwr_steps, "training");
        cfg.rwr_batch = get_pos_int(t, "rwr_batch", cfg.rwr_batch, "training");
        cfg.bc_epochs_per_round =
            get_pos_int(t, "bc_epochs_per_round", cfg.bc_epochs_per_round, "training");
    }
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return config_from_json_text(text);
}

int worker_count_from_env(std::size_t num_seeds) {
    int cap = 0;
    if (const char* env = std::getenv("HYBRIDCTL_THREADS")) cap = std::atoi(env);
    if (cap <= 0) cap = static_cast<int>(std::thread::hardware_concurrency());
    if (cap <= 0) cap = 1;
    return static_cast<int>(std::min<std::size_t>(cap, num_seeds));
}

std::vector<SeedRun> run_all_seeds(const RunConfig& cfg) {
    std::vector<SeedRun> runs(cfg.seeds.size());
    const bool imitation =
        cfg.algo == Algorithm::ImitationHybrid || cfg.algo == Algorithm::ImitationBC;

    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cfg.seeds.size()) return;
            const std::uint64_t seed = cfg.seeds[i];
            RunResult r = imitation ? run_imitation_training(cfg, seed)
                                    : run_experience_training(cfg, seed);
            runs[i] = SeedRun{seed, std::move(r.logs)};
        }
    };

    const int workers = worker_count_from_env(cfg.seeds.size());
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    return runs;
}

void write_outputs(const RunConfig& cfg, const std::vector<SeedRun>& runs,
                   const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);

    json meta;
    meta["wall_ms"] = json::object();

    for (const SeedRun& run : runs) {
        const std::string path =
            out_dir + "/curve_seed" + std::to_string(run.seed) + ".csv";
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path);
        out << "episode,cum_reward,mean_mig,mean_correction,model_loss,wall_ms\n";
        json wall = json::array();
        for (const EpisodeLog& log : run.logs) {
            // wall_ms column is fixed at 0 in the curve file; measured
            // timings live in run_meta.json so curve files stay
            // byte-identical across reruns.
            out << log.episode << ',' << fmt(log.cum_reward) << ',' << fmt(log.mean_mig)
                << ',' << fmt(log.mean_correction) << ',' << fmt(log.model_loss) << ",0\n";
            wall.push_back(log.wall_ms);
        }
        meta["wall_ms"][std::to_string(run.seed)] = std::move(wall);
    }

    json summary;
    summary["config"] = resolved_config_json(cfg);
    json episodes = json::array();
    const std::size_t n_eps = runs.empty() ? 0 : runs.front().logs.size();
    for (std::size_t e = 0; e < n_eps; ++e) {
        std::vector<double> rew, mig, corr, loss;
        for (const SeedRun& run : runs) {
            rew.push_back(run.logs[e].cum_reward);
            mig.push_back(run.logs[e].mean_mig);
            corr.push_back(run.logs[e].mean_correction);
            loss.push_back(run.logs[e].model_loss);
        }
        episodes.push_back({{"episode", e},
                            {"cum_reward_mean", column_mean(rew)},
                            {"cum_reward_std", column_std(rew)},
                            {"mean_mig_mean", column_mean(mig)},
                            {"mean_correction_mean", column_mean(corr)},
                            {"model_loss_mean", column_mean(loss)}});
    }
    summary["episodes"] = std::move(episodes);
    {
        std::ofstream out(out_dir + "/summary.json");
        if (!out) throw std::runtime_error("cannot write summary.json in " + out_dir);
        out << summary.dump(2) << "\n";
    }
    {
        std::ofstream out(out_dir + "/run_meta.json");
        out << meta.dump(2) << "\n";
    }
}

}  // namespace hybridctl
