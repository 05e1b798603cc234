#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ijscc/artifact.hpp"
#include "ijscc/image_io.hpp"
#include "ijscc/metrics.hpp"
#include "ijscc/optimizer.hpp"

namespace ijscc {
namespace harness {

struct ExperimentConfig {
  std::vector<std::string> sources;
  std::vector<double> snr_db = {10.0};
  std::vector<int> steps_list = {2000};
  double lr = 0.01;
  int levels = 7;
  int source_channels = 3;  // overwritten by the loaded image
  std::optional<int> hidden_dim;  // absent -> greedy search over the set
  int kappa_lsm = 25;
  double budget_r = 0.2292;
  int eval_draws = 16;
  std::uint64_t seed = 0;
  std::string outdir = ".";
  int workers = 1;
  int probe_steps = 2000;
};

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

// Flat key=value config file; '#' starts a comment, unknown keys are errors.
inline void apply_config_file(const std::string& path, ExperimentConfig& cfg) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open config file " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    try {
      if (key == "source") {
        cfg.sources = detail::split(value, ',');
      } else if (key == "snr_db") {
        cfg.snr_db.clear();
        for (const auto& v : detail::split(value, ','))
          cfg.snr_db.push_back(v == "inf" ? std::numeric_limits<double>::infinity()
                                          : std::stod(v));
      } else if (key == "steps") {
        cfg.steps_list.clear();
        for (const auto& v : detail::split(value, ','))
          cfg.steps_list.push_back(std::stoi(v));
      } else if (key == "lr") {
        cfg.lr = std::stod(value);
      } else if (key == "d") {
        cfg.hidden_dim = std::stoi(value);
      } else if (key == "kappa_lsm") {
        cfg.kappa_lsm = std::stoi(value);
      } else if (key == "budget_r") {
        cfg.budget_r = std::stod(value);
      } else if (key == "eval_draws") {
        cfg.eval_draws = std::stoi(value);
      } else if (key == "seed") {
        cfg.seed = std::stoull(value);
      } else if (key == "outdir") {
        cfg.outdir = value;
      } else if (key == "levels") {
        cfg.levels = std::stoi(value);
      } else if (key == "workers") {
        cfg.workers = std::stoi(value);
      } else {
        throw ParseError(path + ":" + std::to_string(lineno) + ": unknown key '" +
                         key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": bad value for '" +
                       key + "'");
    }
  }
}

inline CodecConfig make_codec_config(const ExperimentConfig& cfg, int channels) {
  CodecConfig c;
  c.levels = cfg.levels;
  c.level_channels.assign(cfg.levels, 1);
  c.hidden_dim = cfg.hidden_dim.value_or(12);
  c.source_channels = channels;
  c.kappa_lsm = cfg.kappa_lsm;
  return c;
}

// Resolves the codec for one image: fixed (d, kappa_lsm) with kappa_redu
// filling the budget, or a greedy search over the default pair set.
inline CodecConfig resolve_config(const Var& image, const ExperimentConfig& cfg,
                                  const ChannelSpec& spec, const SeedBundle& seeds) {
  CodecConfig base = make_codec_config(cfg, image->shape.c);
  const int div = 1 << (base.levels - 1);
  const std::size_t n =
      static_cast<std::size_t>((image->shape.h + div - 1) / div * div) *
      static_cast<std::size_t>((image->shape.w + div - 1) / div * div);
  if (cfg.hidden_dim) {
    const int kr = derive_kappa_redu(base, cfg.budget_r, n);
    if (kr < 1) {
      CodecConfig probe = base;
      probe.kappa_redu = 1;
      const auto rb = rate_budget(probe, n);
      throw BudgetError("budget R=" + std::to_string(cfg.budget_r) +
                        " infeasible: r_x=" + std::to_string(rb.r_x) +
                        ", minimum r_theta=" + std::to_string(rb.r_theta));
    }
    base.kappa_redu = kr;
    return base;
  }
  OptimizerOptions probe_opt;
  probe_opt.lr = cfg.lr;
  probe_opt.eval_draws = 4;
  return greedy_config_search(image, base, spec, cfg.budget_r,
                              default_search_set(), cfg.probe_steps, seeds,
                              probe_opt);
}

inline int run_encode(const ExperimentConfig& cfg, const std::string& artifact_path,
                      const std::string& report_path = "") {
  if (cfg.sources.size() != 1)
    throw ParseError("encode needs exactly one source image");
  if (cfg.snr_db.size() != 1 || cfg.steps_list.size() != 1)
    throw ParseError("encode needs exactly one snr_db and one steps value");

  Var image = load_image(cfg.sources[0]);
  const auto spec = ChannelSpec::from_snr(cfg.snr_db[0], cfg.seed);
  SeedBundle seeds{cfg.seed, 0};
  CodecConfig config = resolve_config(image, cfg, spec, seeds);

  OptimizerOptions opt;
  opt.lr = cfg.lr;
  opt.eval_draws = cfg.eval_draws;
  auto [artifact, report] =
      overfit_instance(image, config, spec, cfg.steps_list[0], seeds, opt);
  write_artifact_file(artifact_path, artifact);
  if (!report_path.empty()) {
    std::ofstream rf(report_path);
    rf << report.to_csv();
  }
  std::cout << "encoded " << cfg.sources[0] << " -> " << artifact_path << "\n"
            << "  config: d=" << config.hidden_dim
            << " kappa_lsm=" << config.kappa_lsm
            << " kappa_redu=" << config.kappa_redu << "\n"
            << "  rates: r_x=" << report.realized.r_x
            << " r_theta=" << report.realized.r_theta
            << " r_total=" << report.realized.r_total << "\n"
            << "  best eval PSNR " << report.best_eval_psnr << " dB at step "
            << report.best_step << " (" << report.encode_seconds << " s)\n";
  return 0;
}

inline int run_decode(const std::string& artifact_path, const std::string& out_path,
                      const std::string& reference_path, std::uint64_t channel_seed,
                      bool noiseless) {
  auto artifact = read_artifact_file(artifact_path);
  if (noiseless) artifact.snr_db = std::numeric_limits<double>::infinity();
  RngStream rng(derive_key(channel_seed, StreamTag::channel_noise_eval));
  const auto t0 = std::chrono::steady_clock::now();
  Var rec = decode_artifact(artifact, rng);
  const double decode_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                t0)
          .count();
  save_image(out_path, rec);
  std::cout << "decoded " << artifact_path << " -> " << out_path << " ("
            << decode_ms << " ms)\n";
  if (!reference_path.empty()) {
    Var ref = load_image(reference_path);
    if (ref->shape != rec->shape)
      throw ParseError("reference image dims do not match the artifact");
    const double p = psnr(rec, ref);
    const int scales = ms_ssim_max_scales(rec->shape.h, rec->shape.w);
    std::cout << "  PSNR " << p << " dB";
    if (scales >= 1) {
      const double ms = ms_ssim(rec, ref, scales);
      std::cout << ", MS-SSIM " << ms << " (" << ms_ssim_db(ms) << " dB, "
                << scales << " scales)";
    }
    std::cout << "\n";
  }
  return 0;
}

inline int run_info(const ExperimentConfig& cfg, int width, int height) {
  CodecConfig config = make_codec_config(cfg, cfg.source_channels);
  std::cout << "parameters: " << param_count(config) << "\n"
            << "multiplies/pixel: " << mult_count_per_pixel(config) << "\n";
  if (width > 0 && height > 0) {
    const int div = 1 << (config.levels - 1);
    const std::size_t n =
        static_cast<std::size_t>((height + div - 1) / div * div) *
        static_cast<std::size_t>((width + div - 1) / div * div);
    const int kr = derive_kappa_redu(config, cfg.budget_r, n);
    if (kr < 1) {
      std::cout << "budget R=" << cfg.budget_r << ": infeasible\n";
      return 3;
    }
    config.kappa_redu = kr;
    const auto rb = rate_budget(config, n);
    std::cout << "kappa_redu: " << kr << "\n"
              << "r_x: " << rb.r_x << "\nr_theta: " << rb.r_theta
              << "\nr_total: " << rb.r_total << "\n";
  }
  return 0;
}

// Min-max normalized grayscale dump of one channel plane; constant planes
// map to mid-gray.
inline void dump_plane(const std::string& path, const double* v, int h, int w) {
  double lo = v[0], hi = v[0];
  const std::size_t n = static_cast<std::size_t>(h) * w;
  for (std::size_t i = 0; i < n; ++i) {
    lo = std::min(lo, v[i]);
    hi = std::max(hi, v[i]);
  }
  auto img = Tensor::make({1, h, w});
  for (std::size_t i = 0; i < n; ++i)
    img->data[i] = (hi > lo) ? (v[i] - lo) / (hi - lo) : 0.5;
  save_image(path, img);
}

inline int run_dump_symbols(const std::string& artifact_path,
                            const std::string& outdir, std::uint64_t channel_seed) {
  auto a = read_artifact_file(artifact_path);
  std::filesystem::create_directories(outdir);
  const auto spec = ChannelSpec::from_snr(a.snr_db);
  RngStream rng(derive_key(channel_seed, StreamTag::channel_noise_eval));

  auto sent = pyramid_from_flat(a.config, a.padded_height, a.padded_width, a.symbols);
  auto noisy_syms = awgn_transmit_padded(a.symbols, spec, rng);
  auto noisy_params = awgn_transmit_padded(a.param_stream, spec, rng);
  auto received =
      pyramid_from_flat(a.config, a.padded_height, a.padded_width, noisy_syms);

  auto dump_pyramid = [&](const PyramidSymbols& p, const std::string& tag) {
    for (std::size_t k = 0; k < p.levels.size(); ++k) {
      const auto& l = p.levels[k];
      for (int c = 0; c < l->shape.c; ++c) {
        std::ostringstream name;
        name << outdir << "/level_" << tag << "_" << (k + 1);
        if (l->shape.c > 1) name << "_c" << c;
        name << ".pgm";
        dump_plane(name.str(),
                   l->data.data() +
                       static_cast<std::size_t>(c) * l->shape.h * l->shape.w,
                   l->shape.h, l->shape.w);
      }
    }
  };
  dump_pyramid(sent, "in");
  dump_pyramid(received, "out");

  auto theta_flat = repetition_decode(noisy_params, redu_param_count(),
                                      lsm_param_count(a.config), a.plan);
  auto theta = DecoderParams::from_flat(a.config, theta_flat);
  Tape tape;
  Var u = redu_forward(tape, received.levels, theta.redu_kernel);
  const std::size_t npix = static_cast<std::size_t>(u->shape.h) * u->shape.w;
  for (int c = 0; c < u->shape.c; ++c) {
    std::ostringstream name;
    name << outdir << "/redu_ch_" << c << ".pgm";
    dump_plane(name.str(), u->data.data() + c * npix, u->shape.h, u->shape.w);
  }
  std::cout << "dumped " << sent.levels.size() << " input levels, "
            << received.levels.size() << " output levels, " << u->shape.c
            << " ReDU channels to " << outdir << "\n";
  return 0;
}

struct ResultRow {
  std::string image;
  double snr_db = 0.0;
  int d = 0, kappa_lsm = 0, kappa_redu = 0;
  int steps = 0;
  double r_x = 0.0, r_theta = 0.0, r_total = 0.0;
  double psnr_mean = 0.0, psnr_std = 0.0;
  double msssim = 0.0;
  double encode_seconds = 0.0, decode_ms = 0.0;
  std::uint64_t seed = 0;
  std::string status = "ok";
};

inline void run_sweep_row(const ExperimentConfig& cfg, const std::string& image_path,
                          double snr, int steps, std::size_t row_index,
                          ResultRow& row) {
  row.image = image_path;
  row.snr_db = snr;
  row.steps = steps;
  Var image = load_image(image_path);
  const auto spec = ChannelSpec::from_snr(snr, cfg.seed);
  // Every row gets its own derived stream family so rows are independently
  // reproducible regardless of scheduling.
  SeedBundle seeds{cfg.seed,
                   derive_key({static_cast<std::uint64_t>(StreamTag::sweep_row),
                               row_index})};
  row.seed = seeds.instance;

  CodecConfig config = resolve_config(image, cfg, spec, seeds);
  row.d = config.hidden_dim;
  row.kappa_lsm = config.kappa_lsm;
  row.kappa_redu = config.kappa_redu;

  OptimizerOptions opt;
  opt.lr = cfg.lr;
  auto [artifact, report] = overfit_instance(image, config, spec, steps, seeds, opt);
  row.r_x = report.realized.r_x;
  row.r_theta = report.realized.r_theta;
  row.r_total = report.realized.r_total;
  row.encode_seconds = report.encode_seconds;

  RngStream eval_rng(seeds.stream_key(StreamTag::channel_noise_eval, 0xe7a1));
  auto eval = evaluate_artifact(artifact, image, cfg.eval_draws, eval_rng);
  row.psnr_mean = eval.mean_psnr;
  row.psnr_std = eval.std_psnr;

  const auto t0 = std::chrono::steady_clock::now();
  Var rec = decode_artifact(artifact, eval_rng);
  row.decode_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
  const int scales = ms_ssim_max_scales(rec->shape.h, rec->shape.w);
  row.msssim = scales >= 1 ? ms_ssim(rec, image, scales) : 0.0;
}

inline int run_sweep(const ExperimentConfig& cfg) {
  if (cfg.sources.empty()) throw ParseError("sweep: no source images given");
  if (cfg.snr_db.empty()) throw ParseError("sweep: empty snr_db list");
  if (cfg.steps_list.empty()) throw ParseError("sweep: empty steps list");
  for (const auto& s : cfg.sources)
    if (!std::filesystem::exists(s)) throw ParseError("sweep: missing image " + s);
  std::filesystem::create_directories(cfg.outdir);

  struct Task {
    std::string image;
    double snr;
    int steps;
  };
  std::vector<Task> tasks;
  for (const auto& img : cfg.sources)
    for (double snr : cfg.snr_db)
      for (int steps : cfg.steps_list) tasks.push_back({img, snr, steps});

  std::vector<ResultRow> rows(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        run_sweep_row(cfg, tasks[i].image, tasks[i].snr, tasks[i].steps, i, rows[i]);
      } catch (const std::exception& e) {
        rows[i].image = tasks[i].image;
        rows[i].snr_db = tasks[i].snr;
        rows[i].steps = tasks[i].steps;
        rows[i].status = std::string("error: ") + e.what();
      }
    }
  };
  const int nworkers = std::max(1, cfg.workers);
  std::vector<std::thread> pool;
  for (int i = 1; i < nworkers; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::ofstream csv(cfg.outdir + "/results.csv");
  csv.precision(10);
  csv << "image,snr_db,d,kappa_lsm,kappa_redu,steps,r_x,r_theta,r_total,"
         "psnr_mean,psnr_std,ms_ssim,encode_seconds,decode_ms,seed,status\n";
  for (const auto& r : rows)
    csv << r.image << "," << r.snr_db << "," << r.d << "," << r.kappa_lsm << ","
        << r.kappa_redu << "," << r.steps << "," << r.r_x << "," << r.r_theta
        << "," << r.r_total << "," << r.psnr_mean << "," << r.psnr_std << ","
        << r.msssim << "," << r.encode_seconds << "," << r.decode_ms << ","
        << r.seed << "," << r.status << "\n";

  // gnuplot-friendly figure analogs
  auto mean_of = [&](auto pred) {
    double sum = 0.0;
    int n = 0;
    for (const auto& r : rows)
      if (r.status == "ok" && pred(r)) {
        sum += r.psnr_mean;
        ++n;
      }
    return n ? sum / n : 0.0;
  };
  const int max_steps =
      *std::max_element(cfg.steps_list.begin(), cfg.steps_list.end());
  {
    std::ofstream f(cfg.outdir + "/psnr_vs_snr.dat");
    f << "# snr_db psnr_mean (steps=" << max_steps << ")\n";
    for (double snr : cfg.snr_db)
      f << snr << " "
        << mean_of([&](const ResultRow& r) {
             return r.snr_db == snr && r.steps == max_steps;
           })
        << "\n";
  }
  {
    std::ofstream f(cfg.outdir + "/psnr_vs_steps.dat");
    f << "# steps";
    for (double snr : cfg.snr_db) f << " psnr@" << snr << "dB";
    f << "\n";
    for (int steps : cfg.steps_list) {
      f << steps;
      for (double snr : cfg.snr_db)
        f << " "
          << mean_of([&](const ResultRow& r) {
               return r.snr_db == snr && r.steps == steps;
             });
      f << "\n";
    }
  }
  {
    std::ofstream f(cfg.outdir + "/psnr_vs_mults.dat");
    f << "# mults_per_pixel psnr_mean d\n";
    std::vector<int> ds;
    for (const auto& r : rows)
      if (r.status == "ok" &&
          std::find(ds.begin(), ds.end(), r.d) == ds.end())
        ds.push_back(r.d);
    std::sort(ds.begin(), ds.end());
    for (int d : ds) {
      CodecConfig c = make_codec_config(cfg, cfg.source_channels);
      c.hidden_dim = d;
      f << mult_count_per_pixel(c) << " "
        << mean_of([&](const ResultRow& r) { return r.d == d; }) << " " << d
        << "\n";
    }
  }

  int failures = 0;
  for (const auto& r : rows)
    if (r.status != "ok") ++failures;
  std::cout << "sweep: " << rows.size() - failures << "/" << rows.size()
            << " rows ok, results in " << cfg.outdir << "/results.csv\n";
  return 0;
}

}  // namespace harness
}  // namespace ijscc
