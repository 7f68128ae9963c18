// lfs: end-to-end training, video pre-training, evaluation and analysis CLI.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "lfs/harness.hpp"

namespace fs = std::filesystem;
using namespace lfs;

int main(int argc, char** argv) {
    CLI::App app{"LFS self-supervised RL trainer"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "end-to-end RL training");
    std::string train_config, train_out = "runs/train";
    uint64_t train_seed = 0;
    train->add_option("--config", train_config, "config file")->required();
    train->add_option("--seed", train_seed, "master seed");
    train->add_option("--out", train_out, "output directory");

    // pretrain
    auto* pre = app.add_subcommand("pretrain", "action-free video pre-training");
    std::string pre_config, pre_packs, pre_out = "runs/pretrain";
    uint64_t pre_seed = 0;
    pre->add_option("--config", pre_config, "config file")->required();
    pre->add_option("--packs", pre_packs, "frame-pack file or directory of .lfsp packs")->required();
    pre->add_option("--seed", pre_seed, "master seed");
    pre->add_option("--out", pre_out, "output directory");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a policy checkpoint");
    std::string ev_ckpt, ev_env = "speedworld";
    int ev_episodes = 10, ev_h = 16, ev_w = 16, ev_len = 250, ev_repeat = 2;
    uint64_t ev_seed = 0;
    ev->add_option("--checkpoint", ev_ckpt, "policy checkpoint")->required();
    ev->add_option("--env", ev_env, "environment name");
    ev->add_option("--episodes", ev_episodes, "evaluation episodes");
    ev->add_option("--height", ev_h, "frame height");
    ev->add_option("--width", ev_w, "frame width");
    ev->add_option("--episode-length", ev_len, "episode length in frames");
    ev->add_option("--action-repeat", ev_repeat, "action repeat");
    ev->add_option("--seed", ev_seed, "evaluation seed");

    // analyze-values
    auto* an = app.add_subcommand("analyze-values", "critic-value comparison of synthetic vs real observations");
    std::string an_ckpt, an_config;
    uint64_t an_seed = 0;
    int an_updates = 1000;
    an->add_option("--checkpoint", an_ckpt, "policy checkpoint")->required();
    an->add_option("--config", an_config, "config file")->required();
    an->add_option("--seed", an_seed, "analysis seed");
    an->add_option("--updates", an_updates, "number of sampled updates to average over");

    // pack
    auto* pk = app.add_subcommand("pack", "bundle a directory of PGM frames into a frame pack");
    std::string pk_frames, pk_out;
    int pk_eplen = 250;
    std::string pk_dtype = "u8";
    pk->add_option("--frames", pk_frames, "directory of .pgm frames (sorted by name)")->required();
    pk->add_option("--out", pk_out, "output .lfsp file")->required();
    pk->add_option("--episode-length", pk_eplen, "frames per episode");
    pk->add_option("--dtype", pk_dtype, "payload dtype: u8 or f64");

    // gen-videos
    auto* gv = app.add_subcommand("gen-videos", "generate random-policy demonstration packs");
    std::string gv_config, gv_out;
    int gv_episodes = 320;
    uint64_t gv_seed = 0;
    gv->add_option("--config", gv_config, "config file (environment section)")->required();
    gv->add_option("--episodes", gv_episodes, "number of demonstration episodes");
    gv->add_option("--out", gv_out, "output .lfsp file")->required();
    gv->add_option("--seed", gv_seed, "generation seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            auto cfg = harness::load_config(train_config);
            harness::train_end_to_end(cfg, train_seed, train_out);
            std::cout << "run complete: " << train_out << "/metrics.csv\n";
        } else if (*pre) {
            auto cfg = harness::load_config(pre_config);
            std::vector<std::string> packs;
            if (fs::is_directory(pre_packs)) {
                for (const auto& e : fs::directory_iterator(pre_packs))
                    if (e.path().extension() == ".lfsp") packs.push_back(e.path().string());
                std::sort(packs.begin(), packs.end());
            } else {
                packs.push_back(pre_packs);
            }
            const std::string ckpt = harness::pretrain_on_videos(cfg, packs, pre_seed, pre_out);
            std::cout << "encoder checkpoint: " << ckpt << "\n";
        } else if (*ev) {
            worldsim::EnvSpec spec;
            spec.env_name = ev_env;
            spec.frame_height = ev_h;
            spec.frame_width = ev_w;
            spec.episode_length = ev_len;
            spec.action_repeat = ev_repeat;
            spec.validate();
            auto policy = harness::load_policy(ev_ckpt, spec);
            auto res = harness::evaluate_policy(spec, *policy.bank, *policy.nets, policy.cfg.sac_hyper(), ev_episodes,
                                                ev_seed);
            std::printf("episodes: %d\nmean return: %.4f\nstddev: %.4f\n", ev_episodes, res.mean, res.stddev);
        } else if (*an) {
            auto cfg = harness::load_config(an_config);
            auto va = harness::analyze_values(cfg, an_ckpt, an_seed, an_updates);
            std::printf("%-10s %12s %12s %10s\n", "batch", "mean value", "max value", "count");
            std::printf("%-10s %12.4f %12.4f %10lld\n", "synt obs", va.syn_mean, va.syn_max,
                        static_cast<long long>(va.syn_count));
            std::printf("%-10s %12.4f %12.4f %10lld\n", "real obs", va.real_mean, va.real_max,
                        static_cast<long long>(va.real_count));
            std::printf("updates with selection: %d / %d\n", va.updates_with_selection, va.updates_total);
        } else if (*pk) {
            std::vector<std::string> files;
            for (const auto& e : fs::directory_iterator(pk_frames))
                if (e.path().extension() == ".pgm") files.push_back(e.path().string());
            std::sort(files.begin(), files.end());
            require(!files.empty(), "no .pgm frames found in ", pk_frames);
            std::vector<framekit::Frame> frames;
            frames.reserve(files.size());
            for (size_t i = 0; i < files.size(); ++i) {
                auto f = harness::read_pgm(files[i]);
                f.index = static_cast<int64_t>(i) % pk_eplen;
                frames.push_back(std::move(f));
            }
            const auto dtype = pk_dtype == "f64" ? harness::PackDtype::F64 : harness::PackDtype::U8;
            harness::write_framepack(pk_out, frames, pk_eplen, dtype);
            std::cout << "wrote " << frames.size() << " frames to " << pk_out << "\n";
        } else if (*gv) {
            auto cfg = harness::load_config(gv_config);
            harness::generate_videos(cfg.env, gv_episodes, gv_out, gv_seed);
            std::cout << "wrote " << gv_episodes << " episodes to " << gv_out << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
