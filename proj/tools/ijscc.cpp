// Implicit-JSCC command line: per-image overfitted joint source-channel
// coding over a simulated AWGN channel.
//
// Exit codes: 0 success, 1 usage, 2 input parse, 3 infeasible budget,
// 4 runtime divergence.

#include <CLI11.hpp>
#include <iostream>
#include <limits>
#include <string>

#include "ijscc/harness.hpp"

namespace {

using ijscc::harness::ExperimentConfig;

void add_common_flags(CLI::App* cmd, ExperimentConfig& cfg, std::string& config_file) {
  cmd->add_option("--config", config_file, "key=value config file");
  cmd->add_option("--snr", cfg.snr_db, "channel SNR(s) in dB ('inf' = noiseless)")
      ->delimiter(',');
  cmd->add_option("--steps", cfg.steps_list, "optimization steps")->delimiter(',');
  cmd->add_option("--lr", cfg.lr, "learning rate");
  cmd->add_option("--levels", cfg.levels, "pyramid levels L");
  cmd->add_option("--d", cfg.hidden_dim, "hidden dim (omit to greedy-search)");
  cmd->add_option("--kappa-lsm", cfg.kappa_lsm, "LSM repetition factor");
  cmd->add_option("--budget", cfg.budget_r, "total bandwidth ratio R");
  cmd->add_option("--eval-draws", cfg.eval_draws, "noise draws per evaluation");
  cmd->add_option("--seed", cfg.seed, "master seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Implicit-JSCC: overfitted joint source-channel codec"};
  app.require_subcommand(1);

  ExperimentConfig cfg;
  std::string config_file, image_path, artifact_path, out_path, reference_path,
      report_path, outdir;
  std::uint64_t channel_seed = 0;
  bool noiseless = false;
  int info_w = 0, info_h = 0;

  auto* enc = app.add_subcommand("encode", "overfit one image into an artifact");
  enc->add_option("--image", image_path, "source image (PPM/PGM)")->required();
  enc->add_option("--out", artifact_path, "output artifact path")->required();
  enc->add_option("--report", report_path, "training report CSV path");
  add_common_flags(enc, cfg, config_file);

  auto* dec = app.add_subcommand("decode", "decode an artifact");
  dec->add_option("--artifact", artifact_path, "artifact file")->required();
  dec->add_option("--out", out_path, "reconstructed image path")->required();
  dec->add_option("--reference", reference_path, "reference image for metrics");
  dec->add_option("--channel-seed", channel_seed, "channel realization seed");
  dec->add_flag("--noiseless", noiseless, "decode without channel noise");

  auto* swp = app.add_subcommand("sweep", "run an experiment grid");
  swp->add_option("--image", cfg.sources, "source image(s)")->delimiter(',');
  swp->add_option("--outdir", cfg.outdir, "output directory");
  swp->add_option("--workers", cfg.workers, "parallel rows");
  add_common_flags(swp, cfg, config_file);

  auto* dmp = app.add_subcommand("dump-symbols", "dump channel symbols as images");
  dmp->add_option("--artifact", artifact_path, "artifact file")->required();
  dmp->add_option("--outdir", outdir, "output directory")->required();
  dmp->add_option("--channel-seed", channel_seed, "channel realization seed");

  auto* inf = app.add_subcommand("info", "print parameter/multiply counts");
  inf->add_option("--width", info_w, "source width for rate accounting");
  inf->add_option("--height", info_h, "source height for rate accounting");
  inf->add_option("--channels", cfg.source_channels, "source channels");
  add_common_flags(inf, cfg, config_file);

  CLI11_PARSE(app, argc, argv);

  try {
    if (!config_file.empty()) ijscc::harness::apply_config_file(config_file, cfg);
    if (enc->parsed()) {
      cfg.sources = {image_path};
      if (report_path.empty()) report_path = artifact_path + ".report.csv";
      return ijscc::harness::run_encode(cfg, artifact_path, report_path);
    }
    if (dec->parsed())
      return ijscc::harness::run_decode(artifact_path, out_path, reference_path,
                                        channel_seed, noiseless);
    if (swp->parsed()) return ijscc::harness::run_sweep(cfg);
    if (dmp->parsed())
      return ijscc::harness::run_dump_symbols(artifact_path, outdir, channel_seed);
    if (inf->parsed()) return ijscc::harness::run_info(cfg, info_w, info_h);
  } catch (const ijscc::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ijscc::BudgetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ijscc::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
