#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ijscc/artifact.hpp"
#include "ijscc/channel.hpp"
#include "ijscc/codec.hpp"
#include "ijscc/image_io.hpp"
#include "ijscc/metrics.hpp"

namespace ijscc {

struct OptimizerOptions {
  double lr = 0.01;
  bool use_adam = true;  // plain gradient descent when false
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool cosine_decay = true;  // lr decays to lr/100 over the run
  int eval_interval = 250;
  int eval_draws = 4;
  // Divergence guard: abort when loss stays above 10x the initial loss for
  // 1000 consecutive steps.
  double divergence_factor = 10.0;
  int divergence_patience = 1000;
};

struct SeedBundle {
  std::uint64_t master = 0;
  std::uint64_t instance = 0;

  std::uint64_t stream_key(StreamTag tag, std::uint64_t extra = 0) const {
    return derive_key({master, instance, static_cast<std::uint64_t>(tag), extra});
  }
  std::uint64_t common_seed() const { return derive_key({master, instance}); }
};

// All noise entering one training step, sampled up front so the same forward
// pass can be replayed exactly (finite-difference checks pin these).
struct StepNoise {
  std::vector<std::vector<double>> channel;  // per pyramid level
  std::vector<std::vector<double>> param;    // per parameter tensor

  static StepNoise sample(const PyramidSymbols& x, const DecoderParams& theta,
                          const ChannelSpec& spec, const RepetitionPlan& plan,
                          RngStream& channel_rng, RngStream& param_rng) {
    StepNoise n;
    const double sym_std = std::sqrt(spec.sigma_w_sq / 2.0);
    for (const auto& l : x.levels)
      n.channel.push_back(spec.noiseless()
                              ? std::vector<double>(l->data.size(), 0.0)
                              : channel_rng.gaussians(l->data.size(), sym_std));

    // Parameter delivery: normalize by group gain, repeat kappa times, average
    // at the receiver. Net effect on theta_hat is additive noise of standard
    // deviation gain * sqrt(sigma_w^2 / (2*kappa)), a constant for backward.
    auto params = theta.all();
    double gain_redu = 1.0, gain_lsm = 1.0;
    if (!spec.noiseless()) {
      auto flat = theta.flatten();
      gain_redu = detail::group_gain(flat.data(), redu_param_count());
      gain_lsm = detail::group_gain(flat.data() + redu_param_count(),
                                    flat.size() - redu_param_count());
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (spec.noiseless()) {
        n.param.emplace_back(params[i]->data.size(), 0.0);
        continue;
      }
      const bool is_redu = (i == 0);
      const double gain = is_redu ? gain_redu : gain_lsm;
      const int kappa = is_redu ? plan.kappa_redu : plan.kappa_lsm;
      const double std_eff = gain * std::sqrt(spec.sigma_w_sq / (2.0 * kappa));
      n.param.push_back(param_rng.gaussians(params[i]->data.size(), std_eff));
    }
    return n;
  }
};

struct ForwardResult {
  Var loss;
  Var reconstruction;           // pre-clamp
  std::vector<Var> sent_levels;  // normalized symbols actually transmitted
  double symbol_power = 0.0;     // average power per complex symbol
};

// The full transmitter-side training pipeline: power-normalize the pyramid,
// pass it and the (noise-perturbed) parameters through the channel model,
// decode, and score against the padded source.
inline ForwardResult training_forward(Tape& tape, const Var& source,
                                      const PyramidSymbols& x,
                                      const DecoderParams& theta,
                                      const CommonRandomness& m,
                                      const StepNoise& noise) {
  ForwardResult r;
  r.sent_levels = ops::power_normalize(tape, x.levels);

  double sumsq = 0.0;
  std::size_t n = 0;
  for (const auto& l : r.sent_levels) {
    for (double v : l->data) sumsq += v * v;
    n += l->data.size();
  }
  r.symbol_power = 2.0 * sumsq / static_cast<double>(n);

  std::vector<Var> y;
  for (std::size_t k = 0; k < r.sent_levels.size(); ++k)
    y.push_back(ops::add_constant_noise(tape, r.sent_levels[k], noise.channel[k]));

  DecoderParams theta_hat = theta;
  auto params = theta.all();
  std::vector<Var> noisy;
  for (std::size_t i = 0; i < params.size(); ++i)
    noisy.push_back(ops::add_constant_noise(tape, params[i], noise.param[i]));
  theta_hat.redu_kernel = noisy[0];
  theta_hat.lsm_w1 = noisy[1];
  theta_hat.lsm_b1 = noisy[2];
  theta_hat.lsm_w2 = noisy[3];
  theta_hat.lsm_b2 = noisy[4];
  theta_hat.lsm_w3 = noisy[5];
  theta_hat.lsm_b3 = noisy[6];
  theta_hat.conv_a_w = noisy[7];
  theta_hat.conv_a_b = noisy[8];
  theta_hat.conv_b_w = noisy[9];
  theta_hat.conv_b_b = noisy[10];

  r.reconstruction = decode_forward(tape, y, theta_hat, m);
  r.loss = ops::mse_loss(tape, r.reconstruction, source);
  return r;
}

struct OptimizerState {
  int step = 0;
  int total_steps = 0;
  OptimizerOptions options;
  std::vector<std::vector<double>> moment1, moment2;  // one slot per trainable
  double last_loss = 0.0;
  double last_symbol_power = 0.0;

  static OptimizerState init(const PyramidSymbols& x, const DecoderParams& theta,
                             int total_steps, const OptimizerOptions& opt) {
    OptimizerState s;
    s.total_steps = total_steps;
    s.options = opt;
    for (const auto& t : x.levels) {
      s.moment1.emplace_back(t->data.size(), 0.0);
      s.moment2.emplace_back(t->data.size(), 0.0);
    }
    for (const auto& t : theta.all()) {
      s.moment1.emplace_back(t->data.size(), 0.0);
      s.moment2.emplace_back(t->data.size(), 0.0);
    }
    return s;
  }

  double learning_rate() const {
    if (!options.cosine_decay || total_steps <= 1) return options.lr;
    const double lo = options.lr / 100.0;
    const double t = static_cast<double>(step) / total_steps;
    return lo + 0.5 * (options.lr - lo) * (1.0 + std::cos(std::numbers::pi * t));
  }
};

// One joint update of X and theta through a fresh channel realization.
inline double train_step(const Var& source, PyramidSymbols& x, DecoderParams& theta,
                         const ChannelSpec& spec, const RepetitionPlan& plan,
                         const CommonRandomness& m, OptimizerState& state,
                         RngStream& channel_rng, RngStream& param_rng) {
  std::vector<Var> trainables = x.levels;
  for (const auto& t : theta.all()) trainables.push_back(t);
  for (auto& t : trainables) {
    t->ensure_grad();
    t->zero_grad();
  }

  Tape tape;
  const auto noise =
      StepNoise::sample(x, theta, spec, plan, channel_rng, param_rng);
  auto fwd = training_forward(tape, source, x, theta, m, noise);
  const double loss = fwd.loss->data[0];
  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << "non-finite loss " << loss << " at step " << state.step
        << " (lr " << state.learning_rate() << ")";
    throw DivergenceError(msg.str());
  }
  tape.backward(fwd.loss);

  const double lr = state.learning_rate();
  if (lr != 0.0) {
    const auto& opt = state.options;
    const int t = state.step + 1;
    for (std::size_t i = 0; i < trainables.size(); ++i) {
      auto& p = trainables[i];
      if (opt.use_adam) {
        auto& m1 = state.moment1[i];
        auto& m2 = state.moment2[i];
        const double bc1 = 1.0 - std::pow(opt.beta1, t);
        const double bc2 = 1.0 - std::pow(opt.beta2, t);
        for (std::size_t j = 0; j < p->data.size(); ++j) {
          const double g = p->grad[j];
          m1[j] = opt.beta1 * m1[j] + (1.0 - opt.beta1) * g;
          m2[j] = opt.beta2 * m2[j] + (1.0 - opt.beta2) * g * g;
          p->data[j] -= lr * (m1[j] / bc1) / (std::sqrt(m2[j] / bc2) + opt.eps);
        }
      } else {
        for (std::size_t j = 0; j < p->data.size(); ++j)
          p->data[j] -= lr * p->grad[j];
      }
    }
  }

  ++state.step;
  state.last_loss = loss;
  state.last_symbol_power = fwd.symbol_power;
  return loss;
}

// Packages the current (X, theta) as the on-air artifact: normalized symbol
// payload plus the repetition-encoded parameter stream.
inline TransmissionArtifact make_artifact(const PyramidSymbols& x,
                                          const DecoderParams& theta,
                                          const CodecConfig& config,
                                          const ChannelSpec& spec,
                                          int orig_h, int orig_w, int padded_h,
                                          int padded_w, std::uint64_t common_seed) {
  TransmissionArtifact a;
  a.config = config;
  a.height = orig_h;
  a.width = orig_w;
  a.padded_height = padded_h;
  a.padded_width = padded_w;
  a.snr_db = spec.snr_db;
  a.common_seed = common_seed;
  a.plan.kappa_lsm = config.kappa_lsm;
  a.plan.kappa_redu = config.kappa_redu;

  auto flat = x.flatten();
  double sumsq = 0.0;
  for (double v : flat) sumsq += v * v;
  if (sumsq == 0.0) throw ShapeError("make_artifact: all-zero symbol stream");
  const double scale = std::sqrt(flat.size() / (2.0 * sumsq));
  for (auto& v : flat) v *= scale;
  a.symbols = std::move(flat);
  a.param_stream = repetition_encode(theta.flatten(), redu_param_count(), a.plan);
  return a;
}

// One channel realization of an artifact: noisy symbols, repetition-decoded
// parameters, full decode, clamped and cropped to the original dims.
inline Var decode_artifact(const TransmissionArtifact& a, RngStream& rng) {
  const auto spec = ChannelSpec::from_snr(a.snr_db);
  auto noisy_syms = awgn_transmit_padded(a.symbols, spec, rng);
  auto noisy_params = awgn_transmit_padded(a.param_stream, spec, rng);

  const std::size_t lsm_count = lsm_param_count(a.config);
  auto theta_flat =
      repetition_decode(noisy_params, redu_param_count(), lsm_count, a.plan);
  auto theta = DecoderParams::from_flat(a.config, theta_flat);
  auto y = pyramid_from_flat(a.config, a.padded_height, a.padded_width, noisy_syms);
  auto m = CommonRandomness::generate(a.config, a.padded_height, a.padded_width,
                                      spec.sigma_w_sq, a.common_seed);
  Tape tape;
  Var out = decode_forward(tape, y.levels, theta, m);
  return crop(clamp01(out), a.height, a.width);
}

struct EvalResult {
  double mean_psnr = 0.0;
  double std_psnr = 0.0;
  std::vector<double> per_draw;
};

// Mean/std PSNR over E independent channel and parameter-noise realizations.
inline EvalResult evaluate_artifact(const TransmissionArtifact& a, const Var& source,
                                    int draws, RngStream& rng) {
  if (draws < 1) throw ConfigError("evaluate_artifact: draws must be >= 1");
  EvalResult r;
  for (int e = 0; e < draws; ++e) {
    Var rec = decode_artifact(a, rng);
    r.per_draw.push_back(psnr(rec, source));
  }
  double sum = 0.0;
  for (double v : r.per_draw) sum += v;
  r.mean_psnr = sum / draws;
  double var = 0.0;
  for (double v : r.per_draw) var += (v - r.mean_psnr) * (v - r.mean_psnr);
  r.std_psnr = draws > 1 ? std::sqrt(var / (draws - 1)) : 0.0;
  return r;
}

struct TrainReport {
  struct Row {
    int step;
    double loss;
    double eval_psnr_mean;
    double eval_psnr_std;
    double seconds_elapsed;
  };
  std::vector<Row> rows;
  RateBudget realized;
  double best_eval_psnr = 0.0;
  int best_step = 0;
  double encode_seconds = 0.0;

  std::string to_csv(bool include_time = true) const {
    std::ostringstream out;
    out.precision(10);
    out << "step,loss,eval_psnr_mean,eval_psnr_std";
    if (include_time) out << ",seconds_elapsed";
    out << "\n";
    for (const auto& r : rows) {
      out << r.step << "," << r.loss << "," << r.eval_psnr_mean << ","
          << r.eval_psnr_std;
      if (include_time) out << "," << r.seconds_elapsed;
      out << "\n";
    }
    return out.str();
  }
};

// Per-instance overfitting (Eq. 4's O(S)): jointly optimizes the pyramid and
// decoder through the noisy channel, evaluating periodically and returning
// the best-snapshot artifact rather than the last iterate.
inline std::pair<TransmissionArtifact, TrainReport> overfit_instance(
    const Var& source, const CodecConfig& config, const ChannelSpec& spec,
    int steps, const SeedBundle& seeds, OptimizerOptions options = {}) {
  config.validate();
  if (steps < 1) throw ConfigError("overfit_instance: steps must be >= 1");
  for (double v : source->data)
    if (v < 0.0 || v > 1.0)
      throw ConfigError("overfit_instance: source values must lie in [0,1]");

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  const int div = 1 << (config.levels - 1);
  const int orig_h = source->shape.h, orig_w = source->shape.w;
  const int pad_h = (orig_h + div - 1) / div * div;
  const int pad_w = (orig_w + div - 1) / div * div;
  Var padded = (pad_h == orig_h && pad_w == orig_w)
                   ? source
                   : replicate_pad(source, pad_h, pad_w);

  RngStream init_rng(seeds.stream_key(StreamTag::latent_init));
  RngStream pinit_rng(seeds.stream_key(StreamTag::param_init));
  auto x = init_latents(config, pad_h, pad_w, init_rng);
  auto theta = DecoderParams::init(config, pinit_rng);
  auto m = CommonRandomness::generate(config, pad_h, pad_w, spec.sigma_w_sq,
                                      seeds.common_seed());
  RepetitionPlan plan{config.kappa_lsm, config.kappa_redu, 1.0, 1.0};

  auto state = OptimizerState::init(x, theta, steps, options);
  TrainReport report;
  report.realized =
      rate_budget(config, static_cast<std::size_t>(pad_h) * pad_w);

  std::optional<TransmissionArtifact> best;
  double initial_loss = 0.0;
  int over_threshold = 0;

  auto evaluate_now = [&](int step_idx, double loss) {
    auto art = make_artifact(x, theta, config, spec, orig_h, orig_w, pad_h,
                             pad_w, seeds.common_seed());
    RngStream eval_rng(seeds.stream_key(StreamTag::channel_noise_eval, step_idx));
    auto res = evaluate_artifact(art, source, options.eval_draws, eval_rng);
    report.rows.push_back({step_idx, loss, res.mean_psnr, res.std_psnr, elapsed()});
    if (!best || res.mean_psnr > report.best_eval_psnr) {
      best = std::move(art);
      report.best_eval_psnr = res.mean_psnr;
      report.best_step = step_idx;
    }
  };

  for (int s = 0; s < steps; ++s) {
    RngStream channel_rng(seeds.stream_key(StreamTag::channel_noise_train, s));
    RngStream param_rng(seeds.stream_key(StreamTag::param_noise_train, s));
    const double loss =
        train_step(padded, x, theta, spec, plan, m, state, channel_rng, param_rng);
    if (s == 0) initial_loss = loss;
    over_threshold = (loss > initial_loss * options.divergence_factor)
                         ? over_threshold + 1
                         : 0;
    if (over_threshold >= options.divergence_patience) {
      std::ostringstream msg;
      msg << "loss " << loss << " stayed above " << options.divergence_factor
          << "x initial (" << initial_loss << ") for "
          << options.divergence_patience << " steps, aborting at step " << s;
      throw DivergenceError(msg.str());
    }
    if ((s + 1) % options.eval_interval == 0 && s + 1 != steps)
      evaluate_now(s + 1, loss);
  }
  evaluate_now(steps, state.last_loss);
  report.encode_seconds = elapsed();
  return {std::move(*best), std::move(report)};
}

// Largest kappa_redu that fits (d, kappa_lsm) inside the total budget R,
// rounding down; the realized rate is reported rather than the budget.
inline int derive_kappa_redu(const CodecConfig& config, double budget_r,
                             std::size_t source_pixels) {
  CodecConfig probe = config;
  probe.kappa_redu = 1;
  const auto rb = rate_budget(probe, source_pixels);
  const double spare_reals =
      (budget_r - rb.r_x) * 2.0 * static_cast<double>(source_pixels) *
          config.source_channels -
      static_cast<double>(config.kappa_lsm) * lsm_param_count(config);
  return static_cast<int>(std::floor(spare_reals / redu_param_count()));
}

// Short-probe greedy search over (d, kappa_lsm) candidates under a total
// bandwidth budget; ties break toward the smaller hidden dimension.
inline CodecConfig greedy_config_search(
    const Var& source, const CodecConfig& base, const ChannelSpec& spec,
    double budget_r, const std::vector<std::pair<int, int>>& search_set,
    int steps_per_probe, const SeedBundle& seeds, OptimizerOptions options = {}) {
  if (search_set.empty()) throw ConfigError("greedy search: empty search set");
  const int div = 1 << (base.levels - 1);
  const std::size_t pad_h = (source->shape.h + div - 1) / div * div;
  const std::size_t pad_w = (source->shape.w + div - 1) / div * div;
  const std::size_t n = pad_h * pad_w;

  std::vector<CodecConfig> feasible;
  std::ostringstream infeasible;
  for (auto [d, kl] : search_set) {
    CodecConfig c = base;
    c.hidden_dim = d;
    c.kappa_lsm = kl;
    const int kr = derive_kappa_redu(c, budget_r, n);
    if (kr >= 1) {
      c.kappa_redu = kr;
      feasible.push_back(c);
    } else {
      CodecConfig probe = c;
      probe.kappa_redu = 1;
      infeasible << "  (d=" << d << ", kappa_lsm=" << kl
                 << "): r_theta=" << rate_budget(probe, n).r_theta
                 << " at kappa_redu=1\n";
    }
  }
  if (feasible.empty())
    throw BudgetError("no (d, kappa_lsm) candidate fits budget R=" +
                      std::to_string(budget_r) + "\n" + infeasible.str());
  if (feasible.size() == 1) return feasible[0];

  CodecConfig best = feasible[0];
  double best_psnr = -1.0;
  for (std::size_t i = 0; i < feasible.size(); ++i) {
    SeedBundle probe_seeds = seeds;
    probe_seeds.instance = derive_key({seeds.instance, 0xbeefULL, i});
    auto [art, rep] = overfit_instance(source, feasible[i], spec,
                                       steps_per_probe, probe_seeds, options);
    if (rep.best_eval_psnr > best_psnr ||
        (rep.best_eval_psnr == best_psnr &&
         feasible[i].hidden_dim < best.hidden_dim)) {
      best_psnr = rep.best_eval_psnr;
      best = feasible[i];
    }
  }
  return best;
}

}  // namespace ijscc
