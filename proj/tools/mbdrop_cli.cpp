// Command-line front end. Talks to the library exclusively through
// the C API in mbdrop.h; results go to stdout, diagnostics to stderr,
// and the exit code is 0 iff nothing failed.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mbdrop.h"

namespace {

int fail(const std::string& message) {
  std::cerr << "error: " << message << "\n";
  return 1;
}

int fail_api() { return fail(mbd_last_error()); }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string fmt_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

bool parse_dims(const std::string& text, std::size_t& first,
                std::size_t& second) {
  const auto x = text.find('x');
  if (x == std::string::npos || x == 0 || x + 1 == text.size()) return false;
  if (text.find('-') != std::string::npos) return false;
  try {
    std::size_t used_a = 0, used_b = 0;
    const std::string a = text.substr(0, x), b = text.substr(x + 1);
    first = std::stoull(a, &used_a);
    second = std::stoull(b, &used_b);
    if (used_a != a.size() || used_b != b.size()) return false;
  } catch (const std::exception&) {
    return false;
  }
  return first >= 1 && second >= 1;
}

bool ensure_dir(const std::string& dir, std::string& error) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    error = "cannot create output directory " + dir + ": " + ec.message();
    return false;
  }
  return true;
}

// ------------------------------------------------------------------
// stats: exact kept-ratio PMF, optional Monte-Carlo histogram

int run_stats(std::size_t blocks, double q, std::size_t trials,
              std::uint64_t seed, const std::string& out_dir) {
  std::vector<double> probs(blocks + 1);
  if (mbd_kept_ratio_pmf(blocks, q, probs.data()) != MBD_OK) return fail_api();
  double mean = 0.0, stddev = 0.0;
  if (mbd_kept_ratio_moments(blocks, q, &mean, &stddev) != MBD_OK) {
    return fail_api();
  }

  std::string dir_error;
  if (!ensure_dir(out_dir, dir_error)) return fail(dir_error);

  const std::string pmf_path = out_dir + "/pmf.csv";
  {
    std::ofstream file(pmf_path);
    if (!file) return fail("cannot open " + pmf_path + " for writing");
    file << "ratio,exact_prob\n";
    for (std::size_t k = 0; k <= blocks; ++k) {
      file << fmt(static_cast<double>(k) / static_cast<double>(blocks)) << ","
           << fmt_full(probs[k]) << "\n";
    }
    if (!file.flush()) return fail("write to " + pmf_path + " failed");
  }

  std::cout << "kept-ratio distribution for " << blocks << " blocks at q="
            << fmt(q) << "\n";
  std::cout << "P(no drop)=" << fmt(probs[blocks]) << "\n";
  std::cout << "P(all dropped)=" << fmt(probs[0]) << "\n";
  std::cout << "mean kept ratio=" << fmt(mean) << "\n";
  std::cout << "std kept ratio=" << fmt(stddev) << "\n";
  std::cout << "wrote " << pmf_path << "\n";

  if (trials == 0) return 0;

  mbd_rng* rng = nullptr;
  if (mbd_rng_create(seed, &rng) != MBD_OK) return fail_api();
  std::vector<std::uint64_t> counts(blocks + 1);
  const mbd_status status =
      mbd_monte_carlo_kept_ratio(rng, blocks, q, trials, counts.data());
  mbd_rng_destroy(rng);
  if (status != MBD_OK) return fail_api();

  const std::string hist_path = out_dir + "/histogram.csv";
  std::ofstream file(hist_path);
  if (!file) return fail("cannot open " + hist_path + " for writing");
  file << "ratio,exact_prob,empirical_prob\n";
  for (std::size_t k = 0; k <= blocks; ++k) {
    const double empirical =
        static_cast<double>(counts[k]) / static_cast<double>(trials);
    file << fmt(static_cast<double>(k) / static_cast<double>(blocks)) << ","
         << fmt_full(probs[k]) << "," << fmt_full(empirical) << "\n";
  }
  if (!file.flush()) return fail("write to " + hist_path + " failed");
  std::cout << "wrote " << hist_path << " (" << trials << " trials)\n";
  return 0;
}

// ------------------------------------------------------------------
// mask-demo: one mask realization on a ones input, written as a grid

int run_mask_demo(const std::string& partition_text,
                  const std::string& shape_text, double q,
                  std::uint64_t seed, const std::string& out_dir) {
  std::size_t p_time = 0, p_feature = 0, t_extent = 0, d_extent = 0;
  if (!parse_dims(partition_text, p_time, p_feature)) {
    return fail("partition '" + partition_text + "' is not of the form TxF");
  }
  if (!parse_dims(shape_text, t_extent, d_extent)) {
    return fail("shape '" + shape_text + "' is not of the form TxD");
  }

  const std::size_t shape[2] = {t_extent, d_extent};
  std::vector<double> ones(t_extent * d_extent, 1.0);
  mbd_tensor* x = nullptr;
  if (mbd_tensor_create(shape, 2, ones.data(), &x) != MBD_OK) {
    return fail_api();
  }

  mbd_dropout_config config;
  config.q = q;
  config.p_time = p_time;
  config.p_feature = p_feature;
  config.inference = 0;
  config.fixed_inverse = 0;

  mbd_rng* rng = nullptr;
  if (mbd_rng_create(seed, &rng) != MBD_OK) {
    mbd_tensor_destroy(x);
    return fail_api();
  }
  mbd_tensor* out = nullptr;
  mbd_dropout_trace* trace = nullptr;
  const mbd_status status =
      mbd_macro_block_dropout(x, &config, rng, &out, &trace);
  mbd_rng_destroy(rng);
  mbd_tensor_destroy(x);
  if (status != MBD_OK) return fail_api();
  mbd_tensor_destroy(out);

  mbd_tensor* mask = nullptr;
  const double* scales = nullptr;
  std::size_t scale_count = 0;
  if (mbd_dropout_trace_mask(trace, &mask) != MBD_OK ||
      mbd_dropout_trace_scales(trace, &scales, &scale_count) != MBD_OK) {
    mbd_dropout_trace_destroy(trace);
    return fail_api();
  }
  const double scale = scales[0];

  std::string dir_error;
  if (!ensure_dir(out_dir, dir_error)) {
    mbd_tensor_destroy(mask);
    mbd_dropout_trace_destroy(trace);
    return fail(dir_error);
  }
  const std::string mask_path = out_dir + "/mask.csv";
  {
    std::ofstream file(mask_path);
    if (!file) {
      mbd_tensor_destroy(mask);
      mbd_dropout_trace_destroy(trace);
      return fail("cannot open " + mask_path + " for writing");
    }
    file << "# partition=" << p_time << "x" << p_feature << " shape="
         << t_extent << "x" << d_extent << " q=" << fmt(q) << " seed=" << seed
         << "\n";
    file << "# scale=" << fmt_full(scale) << "\n";
    const double* data = mbd_tensor_data(mask);
    for (std::size_t t = 0; t < t_extent; ++t) {
      for (std::size_t d = 0; d < d_extent; ++d) {
        if (d > 0) file << ",";
        file << fmt(data[t * d_extent + d]);
      }
      file << "\n";
    }
    if (!file.flush()) {
      mbd_tensor_destroy(mask);
      mbd_dropout_trace_destroy(trace);
      return fail("write to " + mask_path + " failed");
    }
  }
  mbd_tensor_destroy(mask);
  mbd_dropout_trace_destroy(trace);

  std::cout << "partition " << p_time << "x" << p_feature << " on shape "
            << t_extent << "x" << d_extent << ", q=" << fmt(q) << ", seed="
            << seed << "\n";
  std::cout << "scale=" << fmt(scale) << "\n";
  std::cout << "wrote " << mask_path << "\n";
  return 0;
}

// ------------------------------------------------------------------
// gradcheck: finite-difference report, nonzero exit on any failure

void print_check(const char* name, double max_rel_err, double tolerance,
                 int passed, void* /*user*/) {
  std::cout << name << ": max_rel_err=" << fmt(max_rel_err) << " tol="
            << fmt(tolerance) << (passed ? " PASS" : " FAIL") << "\n";
}

int run_gradcheck(std::uint64_t seed, bool corrupt) {
  int all_passed = 0;
  if (mbd_run_gradient_checks(seed, corrupt ? 1 : 0, print_check, nullptr,
                              &all_passed) != MBD_OK) {
    return fail_api();
  }
  if (!all_passed) return fail("gradient checks failed");
  std::cout << "all gradient checks passed\n";
  return 0;
}

// ------------------------------------------------------------------
// train / compare: delegate to the library, echo the resolved config

int echo_file(const std::string& path) {
  std::ifstream file(path);
  if (!file) return fail("cannot read " + path);
  std::cout << file.rdbuf();
  return 0;
}

struct ProgressState {
  bool verbose = false;
};

void train_progress(std::size_t epoch, double train_loss, double val_loss,
                    void* user) {
  const auto* state = static_cast<const ProgressState*>(user);
  if (!state->verbose) return;
  std::cerr << "epoch " << epoch << " train_loss=" << fmt(train_loss)
            << " val_loss=" << fmt(val_loss) << "\n";
}

void compare_progress(const char* label, std::size_t repeat,
                      std::size_t epoch, double train_loss, double val_loss,
                      void* user) {
  const auto* state = static_cast<const ProgressState*>(user);
  if (!state->verbose) return;
  std::cerr << "[" << label << " repeat " << repeat << "] epoch " << epoch
            << " train_loss=" << fmt(train_loss) << " val_loss="
            << fmt(val_loss) << "\n";
}

int run_train(const std::string& config_path, const std::string& out_dir,
              std::int64_t seed_override, bool verbose) {
  ProgressState state{verbose};
  if (mbd_train_run(config_path.c_str(), out_dir.c_str(), seed_override,
                    train_progress, &state) != MBD_OK) {
    return fail_api();
  }
  std::cout << "resolved config:\n";
  if (int rc = echo_file(out_dir + "/config.json")) return rc;
  std::cout << "wrote " << out_dir << "/metrics.csv\n";
  std::cout << "wrote " << out_dir << "/checkpoint.json\n";
  return 0;
}

int run_compare(const std::string& config_path, const std::string& out_dir,
                std::int64_t seed_override, bool verbose) {
  ProgressState state{verbose};
  if (mbd_compare_run(config_path.c_str(), out_dir.c_str(), seed_override,
                      compare_progress, &state) != MBD_OK) {
    return fail_api();
  }
  std::cout << "resolved config:\n";
  if (int rc = echo_file(out_dir + "/config.json")) return rc;
  std::cout << "comparison table:\n";
  if (int rc = echo_file(out_dir + "/comparison.csv")) return rc;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("mbdrop ") + mbd_version() +
               " — macro-block dropout toolkit"};
  app.require_subcommand(1);

  bool verbose = false;
  app.add_flag("--verbose", verbose,
               "print per-epoch progress to standard error");

  // stats
  auto* stats = app.add_subcommand(
      "stats", "exact kept-ratio PMF and Monte-Carlo histogram");
  std::size_t blocks = 4;
  double stats_q = 0.2;
  std::size_t trials = 100000;
  std::uint64_t stats_seed = 1;
  std::string stats_out = "out/stats";
  stats->add_option("--blocks", blocks, "number of independent blocks")
      ->capture_default_str();
  stats->add_option("--q", stats_q, "drop probability")
      ->capture_default_str();
  stats->add_option("--trials", trials,
                    "Monte-Carlo draws (0 = exact PMF only)")
      ->capture_default_str();
  stats->add_option("--seed", stats_seed, "rng seed")->capture_default_str();
  stats->add_option("--out", stats_out, "output directory")
      ->capture_default_str();

  // mask-demo
  auto* demo = app.add_subcommand(
      "mask-demo", "draw one macro-block mask on a ones input");
  std::string partition = "1x4";
  std::string shape = "6x8";
  double demo_q = 0.2;
  std::uint64_t demo_seed = 1;
  std::string demo_out = "out/mask-demo";
  demo->add_option("--partition", partition, "blocks as TxF")
      ->capture_default_str();
  demo->add_option("--shape", shape, "input extent as TxD")
      ->capture_default_str();
  demo->add_option("--q", demo_q, "drop probability")->capture_default_str();
  demo->add_option("--seed", demo_seed, "rng seed")->capture_default_str();
  demo->add_option("--out", demo_out, "output directory")
      ->capture_default_str();

  // gradcheck
  auto* gradcheck = app.add_subcommand(
      "gradcheck", "finite-difference verification of all backward passes");
  std::uint64_t grad_seed = 1;
  bool corrupt = false;
  gradcheck->add_option("--seed", grad_seed, "rng seed")
      ->capture_default_str();
  gradcheck->add_flag(
      "--corrupt", corrupt,
      "inject an error into one gradient (negative control; must fail)");

  // train
  auto* train = app.add_subcommand("train", "single training run");
  std::string train_config, train_out = "out/train";
  std::int64_t train_seed = -1;
  train->add_option("--config", train_config, "run config file")->required();
  train->add_option("--out", train_out, "output directory")
      ->capture_default_str();
  train->add_option("--seed", train_seed, "override the config seed")
      ->capture_default_str();

  // compare
  auto* compare = app.add_subcommand(
      "compare", "multi-seed comparison across dropout variants");
  std::string compare_config, compare_out = "out/compare";
  std::int64_t compare_seed = -1;
  compare->add_option("--config", compare_config, "run config file")
      ->required();
  compare->add_option("--out", compare_out, "output directory")
      ->capture_default_str();
  compare->add_option("--seed", compare_seed, "override the config seed")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  if (*stats) return run_stats(blocks, stats_q, trials, stats_seed, stats_out);
  if (*demo) {
    return run_mask_demo(partition, shape, demo_q, demo_seed, demo_out);
  }
  if (*gradcheck) return run_gradcheck(grad_seed, corrupt);
  if (*train) return run_train(train_config, train_out, train_seed, verbose);
  if (*compare) {
    return run_compare(compare_config, compare_out, compare_seed, verbose);
  }
  return fail("no subcommand given");
}
