#include "adn/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "adn/rng.hpp"
#include "adn/tensor_io.hpp"

namespace adn::train {

Variant parse_variant(const std::string& s) {
  if (s == "M1") return Variant::M1;
  if (s == "M2") return Variant::M2;
  if (s == "M3") return Variant::M3;
  if (s == "M4") return Variant::M4;
  throw ArgumentError("unknown variant '" + s + "' (expected M1, M2, M3 or M4)");
}

std::string variant_name(Variant v) { return "M" + std::to_string(static_cast<int>(v) + 1); }

LossWeights LossWeights::for_variant(Variant v, const LossWeights& full) {
  LossWeights w = full;
  if (v < Variant::M2) w.rec = 0.0;
  if (v < Variant::M3) w.art = 0.0;
  if (v < Variant::M4) w.self = 0.0;
  return w;
}

void LossWeights::validate() const {
  for (double x : {adv, rec, art, self}) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw ArgumentError("loss weights must be finite and >= 0");
  }
}

// --- config ---------------------------------------------------------------

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ArgumentError("lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ArgumentError("betas must lie in [0, 1)");
  }
  if (batch_size < 2 || batch_size % 2 != 0) {
    throw ArgumentError("batch_size must be a positive even number (half artifact, half clean), got " +
                        std::to_string(batch_size));
  }
  if (steps < 0) throw ArgumentError("steps must be >= 0");
  if (checkpoint_every < 0) throw ArgumentError("checkpoint_every must be >= 0");
  if (base_width < 1) throw ArgumentError("base_width must be >= 1");
  if (!(grad_clip >= 0.0)) throw ArgumentError("grad_clip must be >= 0");
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& v, std::uint64_t line) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw FormatError("config key '" + key + "': cannot parse '" + v + "'", line);
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string format_float(float v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

TrainConfig parse_config(const std::string& text) {
  TrainConfig c;
  std::istringstream in(text);
  std::string raw;
  std::uint64_t line_no = 0;
  std::vector<std::string> seen;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("config: expected 'key = value'", line_no);
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (value.empty()) throw FormatError("config key '" + key + "' has no value", line_no);
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
      throw FormatError("config key '" + key + "' repeated", line_no);
    }
    seen.push_back(key);
    if (key == "lr") {
      c.lr = parse_number<double>(key, value, line_no);
    } else if (key == "beta1") {
      c.beta1 = parse_number<double>(key, value, line_no);
    } else if (key == "beta2") {
      c.beta2 = parse_number<double>(key, value, line_no);
    } else if (key == "batch_size") {
      c.batch_size = parse_number<int>(key, value, line_no);
    } else if (key == "steps") {
      c.steps = parse_number<std::int64_t>(key, value, line_no);
    } else if (key == "seed") {
      c.seed = parse_number<std::uint64_t>(key, value, line_no);
    } else if (key == "variant") {
      try {
        c.variant = parse_variant(value);
      } catch (const ArgumentError& e) {
        throw FormatError(e.what(), line_no);
      }
    } else if (key == "dataset_root") {
      c.dataset_root = value;
    } else if (key == "checkpoint_every") {
      c.checkpoint_every = parse_number<std::int64_t>(key, value, line_no);
    } else if (key == "base_width") {
      c.base_width = parse_number<int>(key, value, line_no);
    } else if (key == "grad_clip") {
      c.grad_clip = parse_number<double>(key, value, line_no);
    } else {
      throw FormatError("unknown config key '" + key + "'", line_no);
    }
  }
  return c;
}

TrainConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const TrainConfig& c) {
  std::ostringstream o;
  o << "lr = " << format_double(c.lr) << '\n'
    << "beta1 = " << format_double(c.beta1) << '\n'
    << "beta2 = " << format_double(c.beta2) << '\n'
    << "batch_size = " << c.batch_size << '\n'
    << "steps = " << c.steps << '\n'
    << "seed = " << c.seed << '\n'
    << "variant = " << variant_name(c.variant) << '\n';
  if (!c.dataset_root.empty()) o << "dataset_root = " << c.dataset_root << '\n';
  o << "checkpoint_every = " << c.checkpoint_every << '\n'
    << "base_width = " << c.base_width << '\n'
    << "grad_clip = " << format_double(c.grad_clip) << '\n';
  return o.str();
}

// --- losses ---------------------------------------------------------------

AdversarialLosses adversarial_losses(const AdnModel& model, const ModelParams& p, const TranslationBundle& b,
                                     const Tensor& xa, const Tensor& y, Side side) {
  using D = AdnModel::Domain;
  AdversarialLosses out;
  if (side == Side::discriminator) {
    out.clean = add(gan_bce(model.discriminate(p, y, D::clean), true),
                    gan_bce(model.discriminate(p, b.x_hat.detach(), D::clean), false));
    out.artifact = add(gan_bce(model.discriminate(p, xa, D::artifact), true),
                       gan_bce(model.discriminate(p, b.ya_hat.detach(), D::artifact), false));
  } else {
    out.clean = gan_bce(model.discriminate(p, b.x_hat, D::clean), true);
    out.artifact = gan_bce(model.discriminate(p, b.ya_hat, D::artifact), true);
  }
  return out;
}

Tensor reconstruction_loss(const TranslationBundle& b, const Tensor& xa, const Tensor& y) {
  return add(l1_loss(b.xa_hat, xa), l1_loss(b.y_hat, y));
}

Tensor artifact_consistency_loss(const TranslationBundle& b, const Tensor& xa, const Tensor& y) {
  return l1_loss(sub(xa, b.x_hat), sub(b.ya_hat, y));
}

Tensor self_reduction_loss(const TranslationBundle& b, const Tensor& y) { return l1_loss(b.y_tilde, y); }

Tensor total_loss(const LossParts& parts, const LossWeights& w) {
  Tensor total;
  auto accumulate = [&total](const Tensor& term, double weight) {
    if (weight == 0.0) return;
    if (!term.defined()) throw ArgumentError("total_loss: weighted term is undefined");
    const Tensor t = scale(term, weight);
    total = total.defined() ? add(total, t) : t;
  };
  if (w.adv != 0.0) {
    if (!parts.adv_clean.defined() || !parts.adv_artifact.defined()) {
      throw ArgumentError("total_loss: adversarial terms are undefined");
    }
    accumulate(add(parts.adv_clean, parts.adv_artifact), w.adv);
  }
  accumulate(parts.art, w.art);
  accumulate(parts.rec, w.rec);
  accumulate(parts.self, w.self);
  return total.defined() ? total : Tensor::scalar(0.0f);
}

LossParts generator_parts(const AdnModel& model, const ModelParams& p, const TranslationBundle& b, const Tensor& xa,
                          const Tensor& y, const LossWeights& w) {
  LossParts parts;
  {
    std::optional<NoGradGuard> off;
    if (w.adv == 0.0) off.emplace();
    const auto adv = adversarial_losses(model, p, b, xa, y, Side::generator);
    parts.adv_clean = adv.clean;
    parts.adv_artifact = adv.artifact;
  }
  auto term = [](double weight, auto&& fn) {
    std::optional<NoGradGuard> off;
    if (weight == 0.0) off.emplace();
    return fn();
  };
  parts.rec = term(w.rec, [&] { return reconstruction_loss(b, xa, y); });
  parts.art = term(w.art, [&] { return artifact_consistency_loss(b, xa, y); });
  parts.self = term(w.self, [&] { return self_reduction_loss(b, y); });
  return parts;
}

// --- state and stepping ---------------------------------------------------

std::vector<std::pair<std::string, float>> LossReport::fields() const {
  return {{"adv_clean", adv_clean},   {"adv_artifact", adv_artifact}, {"rec", rec},
          {"art", art},               {"self", self},                 {"gen_total", gen_total},
          {"disc_clean", disc_clean}, {"disc_artifact", disc_artifact}};
}

std::vector<std::string> TrainState::generator_names() const {
  std::vector<std::string> out;
  for (const auto& [name, t] : params) {
    if (!net::is_discriminator_param(name)) out.push_back(name);
  }
  return out;
}

std::vector<std::string> TrainState::discriminator_names() const {
  std::vector<std::string> out;
  for (const auto& [name, t] : params) {
    if (net::is_discriminator_param(name)) out.push_back(name);
  }
  return out;
}

namespace {

std::vector<Tensor> gather(const ModelParams& params, const std::vector<std::string>& names) {
  std::vector<Tensor> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(params.at(n));
  return out;
}

void zero_grads(ModelParams& params) {
  for (auto& [name, t] : params) t.zero_grad();
}

}  // namespace

TrainState TrainState::fresh(const net::ArchConfig& arch, std::uint64_t seed) {
  TrainState s;
  s.arch = arch;
  s.params = AdnModel(arch).init_params(seed);
  const auto gen = gather(s.params, s.generator_names());
  const auto disc = gather(s.params, s.discriminator_names());
  s.gen_opt = AdamState::for_params(gen);
  s.disc_opt = AdamState::for_params(disc);
  return s;
}

LossReport train_step(const AdnModel& model, TrainState& state, const data::Batch& batch, const TrainConfig& cfg) {
  if (!(model.arch() == state.arch)) throw ArgumentError("train_step: model and state architectures differ");
  const LossWeights w = LossWeights::for_variant(cfg.variant);
  const AdamOptions adam = cfg.adam();
  auto gen = gather(state.params, state.generator_names());
  auto disc = gather(state.params, state.discriminator_names());
  const Tensor& xa = batch.artifact;
  const Tensor& y = batch.clean;

  LossReport r;
  r.step = state.step + 1;
  try {
    zero_grads(state.params);
    const TranslationBundle b = model.forward_translations(state.params, xa, y);

    const auto d = adversarial_losses(model, state.params, b, xa, y, Side::discriminator);
    backward(add(d.clean, d.artifact));
    if (cfg.grad_clip > 0.0) clip_grad_norm(disc, cfg.grad_clip);
    adam_step(disc, state.disc_opt, adam);
    zero_grads(state.params);

    const LossParts parts = generator_parts(model, state.params, b, xa, y, w);
    const Tensor total = total_loss(parts, w);
    if (total.requires_grad()) backward(total);
    if (cfg.grad_clip > 0.0) clip_grad_norm(gen, cfg.grad_clip);
    adam_step(gen, state.gen_opt, adam);
    zero_grads(state.params);

    r.disc_clean = d.clean.item();
    r.disc_artifact = d.artifact.item();
    r.adv_clean = parts.adv_clean.item();
    r.adv_artifact = parts.adv_artifact.item();
    r.rec = parts.rec.item();
    r.art = parts.art.item();
    r.self = parts.self.item();
    r.gen_total = total.item();
  } catch (const TrainingAborted&) {
    throw;
  } catch (const NumericError& e) {
    zero_grads(state.params);
    throw TrainingAborted(std::string("non-finite value at step ") + std::to_string(r.step) + ": " + e.what(), r.step,
                          cfg.seed, batch);
  }
  for (const auto& [name, v] : r.fields()) {
    if (!std::isfinite(v)) {
      throw TrainingAborted("non-finite " + name + " at step " + std::to_string(r.step), r.step, cfg.seed, batch);
    }
  }
  state.step = r.step;
  return r;
}

// --- loop -----------------------------------------------------------------

namespace {

constexpr const char* kLossHeader = "step\tname\tvalue";

// Keeps the header and every row whose step is <= `keep_through`.
void truncate_log(const fs::path& path, std::int64_t keep_through) {
  std::ostringstream kept;
  kept << kLossHeader << '\n';
  if (std::ifstream in{path}) {
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (first) {
        first = false;
        if (line == kLossHeader) continue;
      }
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      std::int64_t step = 0;
      const auto [ptr, ec] = std::from_chars(line.data(), line.data() + (tab == std::string::npos ? 0 : tab), step);
      if (ec == std::errc() && step <= keep_through) kept << line << '\n';
    }
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kept.str();
}

void write_abort_snapshot(const fs::path& dir, const TrainingAborted& e) {
  fs::create_directories(dir);
  write_adnt(dir / "artifact_batch.adnt", e.batch().artifact);
  write_adnt(dir / "clean_batch.adnt", e.batch().clean);
  std::ofstream info(dir / "info.txt", std::ios::trunc);
  info << "step\t" << e.step() << "\nseed\t" << e.seed() << "\nreason\t" << e.what() << '\n';
  for (const auto& id : e.batch().artifact_ids) info << "artifact_id\t" << id << '\n';
  for (const auto& id : e.batch().clean_ids) info << "clean_id\t" << id << '\n';
}

std::string step_name(std::int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%07lld.adnc", static_cast<long long>(step));
  return buf;
}

}  // namespace

TrainState run_training(const TrainConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  if (cfg.dataset_root.empty()) throw ArgumentError("no dataset root configured");
  if (opts.out_dir.empty()) throw ArgumentError("no output directory given");
  fs::create_directories(opts.out_dir);

  const data::UnpairedSampler sampler(cfg.dataset_root);
  const net::ArchConfig arch{cfg.base_width, 1, 4};
  const AdnModel model(arch);
  TrainState state;
  if (opts.resume) {
    state = load_checkpoint(*opts.resume);
    if (!(state.arch == arch)) throw ArgumentError("checkpoint architecture does not match base_width in config");
  } else {
    state = TrainState::fresh(arch, mix_seed(cfg.seed, 0));
  }

  {
    std::ofstream conf(opts.out_dir / "config.txt", std::ios::trunc);
    conf << format_config(cfg);
  }
  const fs::path log_path = opts.out_dir / "loss.tsv";
  truncate_log(log_path, opts.resume ? state.step : 0);
  std::ofstream log(log_path, std::ios::app);
  if (!log) throw std::runtime_error("cannot append to " + log_path.string());

  const std::uint64_t draw_seed = mix_seed(cfg.seed, 1);
  while (state.step < cfg.steps) {
    const data::Batch batch = sampler.draw(draw_seed, state.step, cfg.batch_size);
    LossReport report;
    try {
      report = train_step(model, state, batch, cfg);
    } catch (const TrainingAborted& e) {
      write_abort_snapshot(opts.out_dir / "abort", e);
      throw;
    }
    for (const auto& [name, v] : report.fields()) log << report.step << '\t' << name << '\t' << format_float(v) << '\n';
    log.flush();
    if (cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0) {
      save_checkpoint(state, opts.out_dir / step_name(state.step));
    }
    if (opts.on_step && !opts.on_step(report)) break;
  }
  save_checkpoint(state, opts.out_dir / "final.adnc");
  return state;
}

}  // namespace adn::train
