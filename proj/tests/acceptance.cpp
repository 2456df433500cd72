// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// selected criterion fails.
//
//   adn_acceptance [--only 1,2,...]

#include <CLI11.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "adn/baselines.hpp"
#include "adn/ctsim.hpp"
#include "adn/dataset.hpp"
#include "adn/eval.hpp"
#include "adn/metrics.hpp"
#include "adn/network.hpp"
#include "adn/train.hpp"
#include "fixtures.hpp"
#include "grad_cases.hpp"
#include "oracles.hpp"

using namespace adn;
using namespace adn::ct;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double kGradElement32 = 1e-2;
constexpr double kGradAggregate64 = 1e-4;
constexpr double kAdjointTol = 1e-3;
constexpr double kChordTol = 0.02;
constexpr double kFbpTol = 0.05;
constexpr int kCuppingSeeds = 10;
constexpr double kLiTol = 1e-6;
constexpr double kNmarTol = 1e-3;
constexpr double kMetricTol = 1e-9;
constexpr double kTrainGainDb = 1.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double dot(const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += static_cast<double>(a.data()[i]) * b.data()[i];
  return acc;
}

std::vector<double> dv(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

std::vector<bool> bits(const Mask& m) {
  std::vector<bool> b(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) b[i] = m.flat(i);
  return b;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_text(e.path());
  }
  return files;
}

const fs::path& work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / ("adn_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int cli(const std::string& args) {
  const std::string cmd = "ADN_THREADS=1 '" ADN_CLI_PATH "' " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome gradient_suite() {
  double elem32 = 0.0, agg32 = 0.0, agg64 = 0.0;
  std::string worst;
  for (auto& c : grad_cases::all<float>(11)) {
    const auto r = oracle::fd_check<float>(c.fn, c.inputs, 1e-3, 1e-1);
    if (r.max_element > elem32) worst = c.name;
    elem32 = std::max(elem32, r.max_element);
    agg32 = std::max(agg32, r.aggregate);
  }
  for (auto& c : grad_cases::all<double>(12)) {
    agg64 = std::max(agg64, oracle::fd_check<double>(c.fn, c.inputs, 1e-6, 1e-6).aggregate);
  }
  return {elem32 < kGradElement32 && agg64 < kGradAggregate64,
          fmt("fp32 worst element %.2e (%s), fp32 aggregate %.2e, fp64 aggregate %.2e", elem32, worst.c_str(), agg32,
              agg64)};
}

Outcome radon_checks() {
  const Geometry g = Geometry::for_image(128, 180);
  std::mt19937_64 rng(1);
  const Tensor x = Tensor::randn({128, 128}, rng);
  const Sinogram y{Tensor::randn({g.num_angles, g.num_detectors}, rng), g, std::nullopt, 0};
  const Sinogram rx = radon(x, g);
  const double lhs = dot(rx.data, y.data), rhs = dot(x, radon_adjoint(y));
  const double adjoint = std::abs(lhs - rhs) / std::sqrt(dot(rx.data, rx.data) * dot(y.data, y.data));

  const double r = 40.0;
  const Sinogram s = radon(fixtures::disk(128, r), g);
  double chord_err = 0.0;
  for (int a = 0; a < g.num_angles; ++a) {
    for (int d = 0; d < g.num_detectors; ++d) {
      const double off = g.detector_offset(d);
      if (std::abs(off) >= 0.9 * r) continue;
      const double chord = 2.0 * std::sqrt(r * r - off * off);
      chord_err = std::max(
          chord_err, std::abs(s.data.data()[static_cast<std::size_t>(a * g.num_detectors + d)] - chord) / chord);
    }
  }
  return {adjoint < kAdjointTol && chord_err < kChordTol,
          fmt("adjoint relative error %.2e, worst disk chord error %.2f%%", adjoint, 100 * chord_err)};
}

Outcome fbp_round_trip() {
  const Geometry g = Geometry::for_image(128, 180);
  const Tensor img = smooth_phantom(3, 128);
  const Tensor rec = fbp(radon(img, g));
  double err = 0.0, ref = 0.0;
  const double c = 127 / 2.0;
  for (int i = 0; i < 128; ++i) {
    for (int j = 0; j < 128; ++j) {
      if (std::hypot(i - c, j - c) > 63.5) continue;
      const auto k = static_cast<std::size_t>(i * 128 + j);
      err += std::pow(rec.data()[k] - img.data()[k], 2);
      ref += std::pow(img.data()[k], 2);
    }
  }
  const double rel = std::sqrt(err / ref);
  return {rel < kFbpTol, fmt("relative RMSE %.2f%%", 100 * rel)};
}

Outcome cupping() {
  const int n = 128;
  const double radius = 50.0;
  const Phantom ph = fixtures::water_disk(n, radius);
  const Geometry g = Geometry::for_image(n, 180);
  const Spectrum two = Spectrum::two_bin(0.2);
  int hits = 0;
  double min_gap = 1e300;
  for (std::uint64_t seed = 0; seed < kCuppingSeeds; ++seed) {
    const Tensor hu =
        mu_to_hu(fbp(polychromatic_project(ph, g, two, 1e6, seed, false)), two.effective_mu(Material::water));
    const double gap = fixtures::ring_mean(hu, 0.6 * radius, 0.8 * radius) - fixtures::ring_mean(hu, 0.0, 0.2 * radius);
    hits += gap > 0.0;
    min_gap = std::min(min_gap, gap);
  }
  return {hits == kCuppingSeeds, fmt("%d/%d seeds cupped, smallest annulus-minus-centre gap %.1f HU", hits,
                                     kCuppingSeeds, min_gap)};
}

Outcome sinogram_completion() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2, 2);
  std::bernoulli_distribution coin(0.3);
  const int A = 16, D = 64;
  Tensor d({A, D});
  Mask trace(A, D);
  for (int a = 0; a < A; ++a) {
    const double slope = std::ldexp(std::round(u(rng) * 64), -6), offset = std::round(u(rng) * 8);
    for (int j = 0; j < D; ++j) {
      d.mutable_data()[static_cast<std::size_t>(a * D + j)] = static_cast<float>(offset + slope * j);
      if (j > 0 && j < D - 1 && coin(rng)) trace.set(a, j);
    }
  }
  Geometry flat;
  flat.num_angles = A;
  flat.num_detectors = D;
  const auto li = mar::li_inpaint({d, flat, trace, 0});
  double li_err = 0.0;
  for (std::size_t i = 0; i < d.numel(); ++i) li_err = std::max<double>(li_err, std::abs(li.data.data()[i] - d.data()[i]));

  const Phantom ph = generate_phantom(7, 64, {});
  const Geometry g = Geometry::for_image(64, 90);
  const Sinogram truth = radon(hu_to_mu(rasterize_hu(ph.ellipses, 64, false), 1.0), g);
  Sinogram corrupted = truth;
  corrupted.data = truth.data.clone();
  corrupted.trace_mask = project_trace(ph.metal_mask, g);
  for (std::size_t i = 0; i < corrupted.data.numel(); ++i) {
    if (corrupted.trace_mask->flat(i)) corrupted.data.mutable_data()[i] += 50.0f;
  }
  const auto nm = mar::nmar_with_prior(corrupted, truth);
  double nmar_err = 0.0;
  for (std::size_t i = 0; i < nm.data.numel(); ++i) {
    if (corrupted.trace_mask->flat(i)) {
      nmar_err = std::max<double>(nmar_err, std::abs(nm.data.data()[i] - truth.data.data()[i]));
    }
  }
  return {li_err <= kLiTol && nmar_err < kNmarTol && corrupted.trace_mask->any(),
          fmt("LI affine-row error %.1e, NMAR self-prior trace error %.1e", li_err, nmar_err)};
}

Outcome metric_oracles() {
  std::mt19937_64 rng(3);
  double worst = 0.0;
  bool identity = true, invariant = true;
  for (int k = 0; k < 5; ++k) {
    const int h = 16 + 5 * k, w = 20 + 3 * k;
    const Tensor a = Tensor::uniform({h, w}, rng, 0.0f, 1.0f), b = Tensor::uniform({h, w}, rng, 0.0f, 1.0f);
    Mask m(h, w);
    for (int i = 0; i < 4; ++i) m.set(2 + 3 * i, 4 + k + i);
    worst = std::max(worst, std::abs(psnr(a, b) - oracle::psnr(dv(a), dv(b), {}, 1.0)));
    worst = std::max(worst, std::abs(psnr(a, b, m) - oracle::psnr(dv(a), dv(b), bits(m), 1.0)));
    worst = std::max(worst, std::abs(ssim(a, b) - oracle::ssim(dv(a), dv(b), h, w, {})));
    worst = std::max(worst, std::abs(ssim(a, b, m) - oracle::ssim(dv(a), dv(b), h, w, bits(m))));
    identity = identity && ssim(a, a) == 1.0;
    Tensor b2 = b.clone();
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m.flat(i)) b2.mutable_data()[i] = 7.0f;
    }
    invariant = invariant && psnr(a, b, m) == psnr(a, b2, m) && ssim(a, b, m) == ssim(a, b2, m);
  }
  return {worst < kMetricTol && identity && invariant,
          fmt("worst oracle gap %.1e, SSIM(x,x)=1 %s, masked invariance %s", worst, identity ? "yes" : "no",
              invariant ? "yes" : "no")};
}

Outcome shape_contract() {
  const net::AdnModel m;
  const auto p = m.init_params(0);
  std::mt19937_64 rng(4);
  const Tensor x = Tensor::uniform({1, 1, 128, 128}, rng, -1.0f, 1.0f);
  NoGradGuard guard;
  const Tensor code = m.encode_content(p, x);
  const auto pyr = m.encode_artifact(p, x);
  const Tensor logits = m.discriminate(p, x, net::AdnModel::Domain::clean);
  const bool ok = code.shape() == Shape{1, 256, 32, 32} && pyr[0].shape() == Shape{1, 64, 128, 128} &&
                  pyr[1].shape() == Shape{1, 128, 64, 64} && pyr[2].shape() == Shape{1, 256, 32, 32} &&
                  logits.shape() == Shape{1, 1, 30, 30} && m.decode_clean(p, code).shape() == x.shape();
  return {ok, "code " + shape_str(code.shape()) + ", pyramid " + shape_str(pyr[0].shape()) + " " +
                  shape_str(pyr[1].shape()) + " " + shape_str(pyr[2].shape()) + ", logits " +
                  shape_str(logits.shape())};
}

Outcome loss_zero_points() {
  std::mt19937_64 rng(5);
  auto grid = [&rng] {
    Tensor t = Tensor::uniform({2, 1, 8, 8}, rng, -1.0f, 1.0f);
    for (auto& v : t.mutable_data()) v = std::round(v * 1024.0f) / 1024.0f;
    return t;
  };
  const Tensor xa = grid(), y = grid();
  net::TranslationBundle b;
  b.xa_hat = xa.clone();
  b.y_hat = y.clone();
  b.x_hat = xa.clone();
  b.ya_hat = y.clone();
  b.y_tilde = y.clone();
  const float rec = train::reconstruction_loss(b, xa, y).item();
  const float art = train::artifact_consistency_loss(b, xa, y).item();
  const float self = train::self_reduction_loss(b, y).item();
  float shifted = 0.0f;
  for (float delta : {0.125f, -0.5f, 1.0f}) {
    b.x_hat = add(xa, Tensor(xa.shape(), -delta));
    b.ya_hat = add(y, Tensor(y.shape(), delta));
    shifted = std::max(shifted, train::artifact_consistency_loss(b, xa, y).item());
  }
  return {rec == 0.0f && art == 0.0f && self == 0.0f && shifted == 0.0f,
          fmt("rec %g, art %g, self %g, art under constant shifts %g", rec, art, self, shifted)};
}

Outcome checkpoint_resume() {
  const fs::path root = work_dir() / "ckpt_data";
  data::DatasetSpec spec;
  spec.train_count = 20;
  spec.test_count = 1;
  spec.size = 32;
  spec.seed = 5;
  data::write_dataset(root, spec);
  train::TrainConfig cfg;
  cfg.base_width = 4;
  cfg.seed = 4;
  cfg.lr = 2e-3;
  cfg.steps = 10;
  cfg.checkpoint_every = 5;
  cfg.dataset_root = root.string();

  const fs::path a = work_dir() / "ckpt_a", b = work_dir() / "ckpt_b";
  train::run_training(cfg, {a, std::nullopt, nullptr});
  const auto bytes = read_text(a / "final.adnc");
  train::save_checkpoint(train::load_checkpoint(a / "final.adnc"), work_dir() / "again.adnc");
  const bool round_trip = read_text(work_dir() / "again.adnc") == bytes;

  fs::create_directories(b);
  fs::copy_file(a / "loss.tsv", b / "loss.tsv");
  train::run_training(cfg, {b, a / "step_0000005.adnc", nullptr});
  const bool trace = read_text(a / "loss.tsv") == read_text(b / "loss.tsv");
  const bool final = read_text(b / "final.adnc") == bytes;
  return {round_trip && trace && final, fmt("save-load-save identical %s, resumed loss trace identical %s, "
                                            "final checkpoint identical %s",
                                            round_trip ? "yes" : "no", trace ? "yes" : "no", final ? "yes" : "no")};
}

// Budget for the training comparison; see the README for the scale-down.
constexpr int kTrainWidth = 16;
constexpr std::int64_t kTrainSteps = 2000;
constexpr int kTrainSeeds = 3;

Outcome training_trend() {
  const fs::path root = work_dir() / "train64";
  data::DatasetSpec spec;
  spec.train_count = 400;
  spec.test_count = 50;
  spec.size = 64;
  spec.seed = 0;
  data::write_dataset(root, spec);
  const double raw = eval::run_eval(root, eval::Method::identity).summary.psnr_db;

  auto train_and_score = [&](std::uint64_t seed, train::Variant v) {
    train::TrainConfig cfg;
    cfg.base_width = kTrainWidth;
    cfg.steps = kTrainSteps;
    cfg.seed = seed;
    cfg.variant = v;
    cfg.dataset_root = root.string();
    const fs::path out = work_dir() / ("run_" + train::variant_name(v) + "_" + std::to_string(seed));
    train::run_training(cfg, {out, std::nullopt, nullptr});
    const auto model = eval::Inference::from_checkpoint(out / "final.adnc");
    return eval::run_eval(root, eval::Method::adn, &model).summary.psnr_db;
  };

  int passes = 0, fails = 0;
  std::string log;
  for (std::uint64_t seed = 1; seed <= kTrainSeeds && passes < 2 && fails < 2; ++seed) {
    const double m4 = train_and_score(seed, train::Variant::M4);
    const double m1 = train_and_score(seed, train::Variant::M1);
    const bool ok = m4 - raw >= kTrainGainDb && m4 >= m1;
    (ok ? passes : fails)++;
    log += fmt("; seed %d M4 %.2f M1 %.2f %s", static_cast<int>(seed), m4, m1, ok ? "ok" : "miss");
    std::fprintf(stderr, "  training seed %d: M4 %.2f dB, M1 %.2f dB, uncorrected %.2f dB\n", static_cast<int>(seed),
                 m4, m1, raw);
  }
  return {passes >= 2, fmt("uncorrected %.2f dB", raw) + log + fmt(" (%d of %d seeds needed 2)", passes, passes + fails)};
}

Outcome baseline_ordering() {
  const fs::path root = work_dir() / "baseline128";
  data::DatasetSpec spec;
  spec.train_count = 2;
  spec.test_count = 50;
  spec.size = 128;
  spec.seed = 3;
  data::write_dataset(root, spec);
  const double id = eval::run_eval(root, eval::Method::identity).summary.psnr_db;
  const double li = eval::run_eval(root, eval::Method::li).summary.psnr_db;
  const double nmar = eval::run_eval(root, eval::Method::nmar).summary.psnr_db;
  return {nmar >= li && li > id, fmt("NMAR %.2f dB, LI %.2f dB, uncorrected %.2f dB", nmar, li, id)};
}

Outcome end_to_end_determinism() {
  const fs::path w = work_dir();
  std::ofstream(w / "e2e.cfg") << "steps = 4\nbase_width = 4\nseed = 9\ncheckpoint_every = 2\n";
  bool ran = true;
  // Both training and eval runs read the first dataset so that their inputs,
  // including the recorded dataset path, are identical.
  const std::string d = (w / "e2e_data1").string();
  for (const char* run : {"1", "2"}) {
    ran = ran && cli("synthesize --out " + (w / (std::string("e2e_data") + run)).string() +
                     " --count 10 --size 32 --seed 8 --test-count 3") == 0;
    ran = ran && cli("train --config " + (w / "e2e.cfg").string() + " --data " + d + " --out " +
                     (w / (std::string("e2e_run") + run)).string()) == 0;
    ran = ran && cli("eval --method adn --ckpt " + (w / (std::string("e2e_run") + run) / "final.adnc").string() +
                     " --data " + d + " --out " + (w / (std::string("e2e_eval") + run + ".tsv")).string()) == 0;
  }
  if (!ran) return {false, "a CLI invocation failed"};
  const bool synth = snapshot(w / "e2e_data1") == snapshot(w / "e2e_data2");
  const bool train = snapshot(w / "e2e_run1") == snapshot(w / "e2e_run2");
  const bool eval = read_text(w / "e2e_eval1.tsv") == read_text(w / "e2e_eval2.tsv");
  return {synth && train && eval, fmt("synthesize %s, train %s, eval %s", synth ? "identical" : "differs",
                                      train ? "identical" : "differs", eval ? "identical" : "differs")};
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ADN acceptance suite"};
  std::vector<int> only;
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "gradient suite", gradient_suite},
      {2, "radon adjoint and disk chords", radon_checks},
      {3, "fbp round trip", fbp_round_trip},
      {4, "beam-hardening cupping", cupping},
      {5, "LI and NMAR exactness", sinogram_completion},
      {6, "metric oracles", metric_oracles},
      {7, "shape contract", shape_contract},
      {8, "loss zero points", loss_zero_points},
      {9, "checkpoint round trip and resume", checkpoint_resume},
      {10, "training trend M4 vs M1", training_trend},
      {11, "baseline ordering", baseline_ordering},
      {12, "end-to-end determinism", end_to_end_determinism},
  };
  const std::set<int> selected(only.begin(), only.end());

  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %2d %-34s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::error_code ec;
  fs::remove_all(work_dir(), ec);
  return failed == 0 ? 0 : 1;
}
