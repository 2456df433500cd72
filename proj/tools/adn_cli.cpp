// adn: dataset synthesis, training, inference, baselines and evaluation.
//
// Exit status: 0 success, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "adn/baselines.hpp"
#include "adn/binary.hpp"
#include "adn/dataset.hpp"
#include "adn/eval.hpp"
#include "adn/selfcheck.hpp"
#include "adn/tensor_io.hpp"
#include "adn/train.hpp"

namespace fs = std::filesystem;
using namespace adn;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

// A single .adnt file, or every *_xa.adnt in a directory (every *.adnt when
// there are none), sorted by name.
std::vector<fs::path> collect_inputs(const fs::path& in) {
  if (fs::is_regular_file(in)) return {in};
  if (!fs::is_directory(in)) throw std::runtime_error("input " + in.string() + " does not exist");
  std::vector<fs::path> xa, all;
  for (const auto& e : fs::directory_iterator(in)) {
    if (!e.is_regular_file() || e.path().extension() != ".adnt") continue;
    all.push_back(e.path());
    const std::string stem = e.path().stem().string();
    if (stem.size() > 3 && stem.compare(stem.size() - 3, 3, "_xa") == 0) xa.push_back(e.path());
  }
  auto& chosen = xa.empty() ? all : xa;
  std::sort(chosen.begin(), chosen.end());
  if (chosen.empty()) throw std::runtime_error("no .adnt files in " + in.string());
  return chosen;
}

void write_image(const fs::path& adnt, const Tensor& hu) {
  write_adnt(adnt, hu);
  fs::path pgm = adnt;
  pgm.replace_extension(".pgm");
  eval::write_pgm(pgm, hu);
}

Tensor read_image(const fs::path& path) {
  Tensor t = read_adnt(path);
  if (t.rank() != 2) throw DimensionError(path.string() + ": expected an [H, W] image, got " + shape_str(t.shape()));
  return t;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Artifact disentanglement network for CT metal artifact reduction"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synthesize", "Write a synthetic dataset (trainA, trainB, test, manifest.tsv)");
  std::string synth_out;
  int synth_count = 0, synth_size = 128;
  int synth_test = -1;
  std::uint64_t synth_seed = 0;
  double metal_prob = 1.0;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--count", synth_count, "Training images, split evenly into trainA and trainB")
      ->required()
      ->check(CLI::Range(2, 1000000));
  synth->add_option("--size", synth_size, "Image size in pixels")->required();
  synth->add_option("--seed", synth_seed, "Dataset seed")->required();
  synth->add_option("--metal-prob", metal_prob, "Probability that an artifact phantom holds metal")
      ->check(CLI::Range(0.0, 1.0));
  synth->add_option("--test-count", synth_test, "Test pairs (default: count / 10, at least 1)");

  auto* train_cmd = app.add_subcommand("train", "Train ADN on a dataset");
  std::string cfg_path, train_data, train_out, variant, resume;
  train_cmd->add_option("--config", cfg_path, "key = value config file")->required();
  train_cmd->add_option("--data", train_data, "Dataset root")->required();
  train_cmd->add_option("--out", train_out, "Output directory")->required();
  train_cmd->add_option("--variant", variant, "Loss variant")->check(CLI::IsMember({"M1", "M2", "M3", "M4"}));
  train_cmd->add_option("--resume", resume, "Checkpoint to resume from");

  auto* infer = app.add_subcommand("infer", "Remove artifacts with a trained checkpoint");
  std::string infer_ckpt, infer_in, infer_out;
  infer->add_option("--ckpt", infer_ckpt, "Checkpoint")->required();
  infer->add_option("--in", infer_in, "Input .adnt file or directory")->required();
  infer->add_option("--out", infer_out, "Output directory")->required();

  auto* transfer = app.add_subcommand("transfer", "Transfer artifacts from one image onto a clean image");
  std::string tr_ckpt, tr_artifact, tr_clean, tr_out;
  transfer->add_option("--ckpt", tr_ckpt, "Checkpoint")->required();
  transfer->add_option("--artifact", tr_artifact, "Artifact-affected .adnt")->required();
  transfer->add_option("--clean", tr_clean, "Artifact-free .adnt")->required();
  transfer->add_option("--out", tr_out, "Output .adnt")->required();

  auto* baseline = app.add_subcommand("baseline", "Run a sinogram-completion baseline");
  std::string bl_method, bl_in, bl_out;
  baseline->add_option("--method", bl_method, "li or nmar")->required()->check(CLI::IsMember({"li", "nmar"}));
  baseline->add_option("--in", bl_in, "Input .adnt file or directory")->required();
  baseline->add_option("--out", bl_out, "Output directory")->required();

  auto* evaluate = app.add_subcommand("eval", "Score a method on the test split");
  std::string ev_method, ev_ckpt, ev_data, ev_out;
  evaluate->add_option("--method", ev_method, "adn, li, nmar or identity")
      ->required()
      ->check(CLI::IsMember({"adn", "li", "nmar", "identity"}));
  evaluate->add_option("--ckpt", ev_ckpt, "Checkpoint (adn only)");
  evaluate->add_option("--data", ev_data, "Dataset root")->required();
  evaluate->add_option("--out", ev_out, "Output TSV")->required();

  auto* selfcheck = app.add_subcommand("selfcheck", "Run gradient and adjoint checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*synth) {
      if (synth_count % 2 != 0) throw ArgumentError("--count must be even");
      data::DatasetSpec spec;
      spec.train_count = synth_count;
      spec.test_count = synth_test >= 0 ? synth_test : std::max(1, synth_count / 10);
      spec.size = synth_size;
      spec.seed = synth_seed;
      spec.metal_probability = metal_prob;
      const auto rows = data::write_dataset(synth_out, spec);
      std::printf("wrote %zu samples to %s\n", rows.size(), synth_out.c_str());
    } else if (*train_cmd) {
      train::TrainConfig cfg = train::load_config(cfg_path);
      cfg.dataset_root = train_data;
      if (!variant.empty()) cfg.variant = train::parse_variant(variant);
      train::RunOptions opts;
      opts.out_dir = train_out;
      if (!resume.empty()) opts.resume = fs::path(resume);
      const std::int64_t every = std::max<std::int64_t>(1, cfg.steps / 20);
      opts.on_step = [every](const train::LossReport& r) {
        if (r.step % every == 0) {
          std::printf("step %lld gen %.4f disc %.4f\n", static_cast<long long>(r.step), r.gen_total,
                      r.disc_clean + r.disc_artifact);
          std::fflush(stdout);
        }
        return true;
      };
      const auto state = train::run_training(cfg, opts);
      std::printf("finished at step %lld\n", static_cast<long long>(state.step));
    } else if (*infer) {
      const auto model = eval::Inference::from_checkpoint(infer_ckpt);
      fs::create_directories(infer_out);
      for (const auto& path : collect_inputs(infer_in)) {
        const Tensor xa = read_image(path);
        const Mask metal = ct::segment_metal(xa).mask;
        write_image(fs::path(infer_out) / (path.stem().string() + "_adn.adnt"),
                    eval::correct(xa, metal, eval::Method::adn, &model));
      }
    } else if (*transfer) {
      const auto model = eval::Inference::from_checkpoint(tr_ckpt);
      const Tensor xa = read_image(tr_artifact), y = read_image(tr_clean);
      if (xa.shape() != y.shape()) throw DimensionError("--artifact and --clean differ in shape");
      if (fs::path(tr_out).has_parent_path()) fs::create_directories(fs::path(tr_out).parent_path());
      write_image(tr_out, model.transfer_artifacts(xa, y));
    } else if (*baseline) {
      const auto method = mar::parse_method(bl_method);
      fs::create_directories(bl_out);
      for (const auto& path : collect_inputs(bl_in)) {
        write_image(fs::path(bl_out) / (path.stem().string() + "_" + bl_method + ".adnt"),
                    mar::reconstruct_baseline(read_image(path), method));
      }
    } else if (*evaluate) {
      const auto method = eval::parse_method(ev_method);
      std::optional<eval::Inference> model;
      if (method == eval::Method::adn) {
        if (ev_ckpt.empty()) {
          std::cerr << "eval --method adn requires --ckpt\n" << evaluate->help();
          return kExitUsage;
        }
        model = eval::Inference::from_checkpoint(ev_ckpt);
      }
      const auto result = eval::run_eval(ev_data, method, model ? &*model : nullptr);
      if (fs::path(ev_out).has_parent_path()) fs::create_directories(fs::path(ev_out).parent_path());
      write_text(ev_out, eval::format_eval_tsv(result));
      std::printf("%s: mean PSNR %.3f dB, SSIM %.3f over %zu pairs\n", ev_method.c_str(), result.summary.psnr_db,
                  result.summary.ssim_x100, result.rows.size());
      if (!result.missing.empty()) {
        for (const auto& id : result.missing) std::cerr << "missing files for test pair " << id << '\n';
        return kExitRuntime;
      }
    } else if (*selfcheck) {
      bool ok = true;
      for (const auto& c : run_selfcheck()) {
        std::printf("%-4s %-28s error %.3e (tol %.0e)\n", c.passed ? "ok" : "FAIL", c.name.c_str(), c.error,
                    c.tolerance);
        ok = ok && c.passed;
      }
      return ok ? 0 : kExitRuntime;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
