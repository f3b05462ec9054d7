// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "nist/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "nist/checkpoint.hpp"
#include "nist/config.hpp"
#include "nist/dataset.hpp"
#include "nist/evaluation.hpp"
#include "nist/pfm.hpp"
#include "nist/png_preview.hpp"
#include "nist/selftest.hpp"
#include "nist/train.hpp"

namespace nist {

namespace {

class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct ConfigFlags {
  std::string file;
  std::vector<std::string> sets;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", file, "key=value config file");
    cmd->add_option("--set", sets, "override one config key (key=value), repeatable");
  }

  // File first, then --set overrides, then explicit flags (applied by the caller).
  RunConfig load() const {
    RunConfig c;
    try {
      if (!file.empty()) load_config_file(file, c);
      for (const auto& s : sets) {
        const auto [key, value] = split_setting(s);
        apply_setting(c, key, value);
      }
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return c;
  }
};

void set_or_usage(RunConfig& c, const std::string& key, const std::string& value) {
  try {
    apply_setting(c, key, value);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

std::filesystem::path manifest_path(const std::filesystem::path& p) {
  return std::filesystem::is_directory(p) ? p / "manifest.txt" : p;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void configure_threads() {
  if (const char* env = std::getenv("NIST_THREADS")) {
    const int n = std::atoi(env);
    if (n < 1) throw UsageError("NIST_THREADS must be a positive integer, got '" + std::string(env) + "'");
    Eigen::setNbThreads(n);
  }
}

} // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Neural image-space tessellation: data generation, training, evaluation"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "render an input/label dataset");
  ConfigFlags gen_cfg;
  gen_cfg.attach(gen);
  std::optional<std::string> gen_scene, gen_res;
  std::optional<int> gen_frames, gen_level;
  std::optional<double> gen_alpha;
  std::optional<std::uint64_t> gen_seed;
  std::string gen_out;
  gen->add_option("--scene", gen_scene, "icosphereN, torus, cylinder, capsule, bar_grid");
  gen->add_option("--frames", gen_frames, "number of frames");
  gen->add_option("--res", gen_res, "resolution WxH");
  gen->add_option("--tess-level", gen_level, "Phong tessellation level of the label mesh");
  gen->add_option("--alpha", gen_alpha, "Phong blend factor");
  gen->add_option("--seed", gen_seed, "camera path seed");
  gen->add_option("--out", gen_out, "output directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "train a model from scratch");
  ConfigFlags tr_cfg;
  tr_cfg.attach(tr);
  std::string tr_data, tr_out;
  std::optional<int> tr_steps, tr_batch;
  std::optional<std::uint64_t> tr_seed;
  std::optional<std::string> tr_variant;
  tr->add_option("--data", tr_data, "training manifest or dataset directory")->required();
  tr->add_option("--out", tr_out, "run directory for checkpoints and trace")->required();
  tr->add_option("--steps", tr_steps, "optimizer steps");
  tr->add_option("--batch", tr_batch, "batch size");
  tr->add_option("--seed", tr_seed, "initialization and sampling seed");
  tr->add_option("--ablation", tr_variant, "full, no_deform, no_warp, no_percep");

  // infer
  auto* inf = app.add_subcommand("infer", "run a checkpoint on one frame directory");
  std::string inf_ckpt, inf_frame, inf_out;
  inf->add_option("--checkpoint", inf_ckpt, "checkpoint file")->required();
  inf->add_option("--frame", inf_frame, "frame directory")->required();
  inf->add_option("--out", inf_out, "output directory for pred.pfm and pred.png")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a test set");
  ConfigFlags ev_cfg;
  ev_cfg.attach(ev);
  std::string ev_ckpt, ev_data, ev_out, ev_name = "model";
  bool ev_oracle = false;
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint file");
  ev->add_option("--data", ev_data, "test manifest or dataset directory")->required();
  ev->add_option("--out", ev_out, "directory for report.txt and report.csv")->required();
  ev->add_option("--name", ev_name, "model name in the report");
  ev->add_flag("--oracle-label", ev_oracle, "use the label as prediction (harness check)");

  // ablate
  auto* ab = app.add_subcommand("ablate", "train and compare full, no_deform, no_warp, no_percep");
  ConfigFlags ab_cfg;
  ab_cfg.attach(ab);
  std::string ab_data, ab_test, ab_out;
  std::optional<int> ab_steps;
  std::optional<std::uint64_t> ab_seed;
  ab->add_option("--data", ab_data, "training manifest or dataset directory")->required();
  ab->add_option("--test", ab_test, "held-out manifest or dataset directory")->required();
  ab->add_option("--out", ab_out, "output directory")->required();
  ab->add_option("--steps", ab_steps, "optimizer steps per variant");
  ab->add_option("--seed", ab_seed, "shared seed");

  // selftest
  auto* st = app.add_subcommand("selftest", "gradient checks and invariant oracles");
  double st_fault = 0.0;
  st->add_option("--inject-conv-fault", st_fault, "test-only: scale conv2d weight gradients by 1 + value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    configure_threads();
    if (*gen) {
      RunConfig c = gen_cfg.load();
      if (gen_scene) set_or_usage(c, "scene", *gen_scene);
      if (gen_frames) c.frames = *gen_frames;
      if (gen_res) set_or_usage(c, "res", *gen_res);
      if (gen_level) c.tess.level = *gen_level;
      if (gen_alpha) c.tess.alpha = *gen_alpha;
      if (gen_seed) c.data_seed = *gen_seed;
      try {
        c.validate();
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      const Manifest m = generate_dataset(c.scene_spec(), c.frames, c.data_seed, c.tess, gen_out, c.width, c.height);
      std::cout << "wrote " << m.frames.size() << " frames to " << gen_out << "\n";
    } else if (*tr) {
      RunConfig c = tr_cfg.load();
      if (tr_steps) c.train.steps = *tr_steps;
      if (tr_batch) c.train.batch_size = *tr_batch;
      if (tr_seed) c.train.seed = *tr_seed;
      TrainConfig tc = c.train;
      if (tr_variant) {
        try {
          tc = make_ablation(tc, *tr_variant);
        } catch (const std::invalid_argument& e) {
          throw UsageError(e.what());
        }
      }
      const Manifest m = read_manifest(manifest_path(tr_data));
      const int every = std::max(1, tc.steps / 20);
      const TrainResult r = train(m, tc, tr_out, [every](const StepRecord& s) {
        if (s.step % every == 0) {
          std::printf("step %d total %.5f rr %.5f shade %.5f percep %.5f\n", s.step, s.total, s.rr, s.shade, s.percep);
          std::fflush(stdout);
        }
      });
      std::cout << "checkpoint " << r.checkpoint.string() << "\ntrace " << r.trace.string() << "\n";
    } else if (*inf) {
      Network<float> net = load_network(inf_ckpt);
      const GBufferFrame frame = read_frame(inf_frame);
      net.config().validate_input(frame.height, frame.width);
      ad::NoGradGuard no_grad;
      const ForwardResult<float> r = net.forward(make_input<float>({&frame}));
      const std::size_t hw = frame.pixels();
      pfm::Image img{frame.width, frame.height, 3, std::vector<float>(3 * hw)};
      for (std::size_t p = 0; p < hw; ++p)
        for (int ch = 0; ch < 3; ++ch) img.data[3 * p + ch] = r.image.data()[ch * hw + p];
      std::filesystem::create_directories(inf_out);
      pfm::write(std::filesystem::path(inf_out) / "pred.pfm", img);
      write_png(std::filesystem::path(inf_out) / "pred.png", img.data, img.width, img.height);
      std::cout << "wrote " << (std::filesystem::path(inf_out) / "pred.pfm").string() << "\n";
    } else if (*ev) {
      const RunConfig c = ev_cfg.load();
      if (ev_ckpt.empty() && !ev_oracle) throw UsageError("eval needs --checkpoint or --oracle-label");
      const Manifest m = read_manifest(manifest_path(ev_data));
      EvalOptions opts{c.train.silhouette, ev_oracle};
      std::optional<Network<float>> net;
      if (!ev_oracle) net.emplace(load_network(ev_ckpt));
      const EvalReport report = evaluate(net ? &*net : nullptr, m, opts, ev_oracle ? "oracle_label" : ev_name);
      write_report(ev_out, report);
      std::printf("l1_sil %.6f baseline %.6f ratio %.5f psnr_sil %.3f\n", report.aggregate.l1_sil,
                  report.aggregate.baseline_l1_sil, report.aggregate.ratio, report.aggregate.psnr_sil);
    } else if (*ab) {
      RunConfig c = ab_cfg.load();
      if (ab_steps) c.train.steps = *ab_steps;
      if (ab_seed) c.train.seed = *ab_seed;
      const Manifest train_m = read_manifest(manifest_path(ab_data));
      const Manifest test_m = read_manifest(manifest_path(ab_test));
      std::vector<EvalReport> reports;
      for (const auto& variant : kAblations) {
        const std::filesystem::path dir = std::filesystem::path(ab_out) / variant;
        std::cout << "training " << variant << "\n" << std::flush;
        const TrainResult r = train(train_m, make_ablation(c.train, variant), dir);
        const Network<float> net = load_network(r.checkpoint);
        reports.push_back(evaluate(&net, test_m, {c.train.silhouette, false}, variant));
        write_report(dir, reports.back());
      }
      const AblationTable table = compare_ablations(reports);
      write_text(std::filesystem::path(ab_out) / "ablation.txt", table.text);
      write_text(std::filesystem::path(ab_out) / "ablation.csv", table.csv);
      std::cout << table.text;
    } else if (*st) {
      ad::fault::set_conv_backward_perturbation(st_fault);
      const auto results = run_selftest(std::cout);
      std::size_t failed = 0;
      for (const auto& r : results) failed += r.passed ? 0 : 1;
      std::cout << results.size() - failed << "/" << results.size() << " checks passed\n";
      if (failed) {
        std::cerr << "selftest failed:";
        for (const auto& r : results)
          if (!r.passed) std::cerr << " " << r.name;
        std::cerr << "\n";
        return 1;
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

} // namespace nist
