#include <cmath>

#include "adn/binary.hpp"
#include "adn/train.hpp"

namespace adn::train {

namespace {

constexpr char kMagic[] = "ADNC";
constexpr std::uint32_t kMaxRank = 8;
// Step counters are stored as float32 and must stay exactly representable.
constexpr std::int64_t kMaxStoredStep = std::int64_t{1} << 24;

Tensor step_tensor(std::int64_t step) {
  if (step < 0 || step > kMaxStoredStep) throw ArgumentError("checkpoint: step counter out of range");
  return Tensor(Shape{1}, static_cast<float>(step));
}

void add_optimizer(std::map<std::string, Tensor>& entries, const std::string& prefix,
                   const std::vector<std::string>& names, const AdamState& opt) {
  if (opt.m.size() != names.size() || opt.v.size() != names.size()) {
    throw DimensionError("checkpoint: optimizer state does not match its parameter group");
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    entries.emplace(prefix + "m/" + names[i], opt.m[i]);
    entries.emplace(prefix + "v/" + names[i], opt.v[i]);
  }
  entries.emplace(prefix + "step", step_tensor(opt.step));
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const TrainState& state, bool with_optimizer) {
  std::map<std::string, Tensor> entries(state.params.begin(), state.params.end());
  if (with_optimizer) {
    add_optimizer(entries, "opt/gen/", state.generator_names(), state.gen_opt);
    add_optimizer(entries, "opt/disc/", state.discriminator_names(), state.disc_opt);
    entries.emplace("opt/train/step", step_tensor(state.step));
  }
  ByteWriter w;
  w.bytes(std::string_view(kMagic, 4));
  w.u8(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {
    if (name.empty() || name.size() > 0xFFFF) throw ArgumentError("checkpoint: bad entry name length");
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t.data()) w.f32(v);
  }
  return w.take();
}

TrainState decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.bytes(4) != std::string_view(kMagic, 4)) throw FormatError("not an ADNC checkpoint (bad magic)", 0);
  const std::size_t version_at = r.offset();
  if (const auto v = r.u8(); v != kCheckpointVersion) {
    throw FormatError("unsupported ADNC version " + std::to_string(v), version_at);
  }
  const std::uint32_t count = r.u32();
  std::map<std::string, Tensor> entries;
  std::string previous;
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::size_t entry_at = r.offset();
    const std::uint16_t len = r.u16();
    if (len == 0) r.fail("empty entry name");
    std::string name = r.bytes(len);
    if (e > 0 && !(previous < name)) throw FormatError("entry '" + name + "' out of order or duplicated", entry_at);
    const std::uint32_t rank = r.u32();
    if (rank > kMaxRank) r.fail("entry '" + name + "' has rank " + std::to_string(rank));
    Shape shape;
    std::uint64_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t dim = r.u32();
      shape.push_back(dim);
      numel *= dim;
      if (numel > r.remaining() / 4 + 1) r.fail("entry '" + name + "' claims more data than the file holds");
    }
    r.need(static_cast<std::size_t>(numel) * 4);
    std::vector<float> data(static_cast<std::size_t>(numel));
    for (auto& v : data) v = r.f32();
    previous = name;
    entries.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (!r.at_end()) r.fail("trailing bytes after last entry");
  const std::size_t end = r.offset();

  TrainState s;
  bool has_opt = false;
  for (auto& [name, t] : entries) {
    if (name.rfind("opt/", 0) == 0) {
      has_opt = true;
    } else {
      s.params.emplace(name, t);
    }
  }
  auto first = s.params.find("E_I.down0.weight");
  if (first == s.params.end() || first->second.rank() != 4) throw FormatError("checkpoint lacks E_I.down0.weight", end);
  s.arch.base_width = static_cast<int>(first->second.dim(0));
  s.arch.in_channels = static_cast<int>(first->second.dim(1));
  s.arch.residual_blocks = 0;
  while (s.params.count("E_I.res" + std::to_string(s.arch.residual_blocks) + ".a.weight")) ++s.arch.residual_blocks;
  try {
    net::AdnModel(s.arch).check_params(s.params);
  } catch (const DimensionError& e) {
    throw FormatError(std::string("checkpoint parameters inconsistent: ") + e.what(), end);
  }
  for (auto& [name, t] : s.params) t.set_requires_grad(true);

  auto take = [&](const std::string& name) -> Tensor {
    auto it = entries.find(name);
    if (it == entries.end()) throw FormatError("checkpoint optimizer section lacks '" + name + "'", end);
    return it->second;
  };
  auto read_step = [&](const std::string& name) {
    const Tensor t = take(name);
    if (t.numel() != 1) throw FormatError("'" + name + "' must hold one value", end);
    const float v = t.data()[0];
    if (!(v >= 0.0f) || v != std::floor(v) || v > static_cast<float>(kMaxStoredStep)) {
      throw FormatError("'" + name + "' is not a valid step counter", end);
    }
    return static_cast<std::int64_t>(v);
  };
  auto load_group = [&](const std::string& prefix, const std::vector<std::string>& names, AdamState& opt) {
    std::vector<Tensor> params;
    for (const auto& n : names) params.push_back(s.params.at(n));
    opt = AdamState::for_params(params);
    if (!has_opt) return;
    for (std::size_t i = 0; i < names.size(); ++i) {
      opt.m[i] = take(prefix + "m/" + names[i]);
      opt.v[i] = take(prefix + "v/" + names[i]);
      if (opt.m[i].shape() != params[i].shape() || opt.v[i].shape() != params[i].shape()) {
        throw FormatError("optimizer moment shape mismatch for '" + names[i] + "'", end);
      }
    }
    opt.step = read_step(prefix + "step");
  };
  load_group("opt/gen/", s.generator_names(), s.gen_opt);
  load_group("opt/disc/", s.discriminator_names(), s.disc_opt);
  if (has_opt) {
    s.step = read_step("opt/train/step");
    const std::size_t expected = s.params.size() * 3 + 3;
    if (entries.size() != expected) throw FormatError("checkpoint has unexpected optimizer entries", end);
  }
  return s;
}

void save_checkpoint(const TrainState& state, const fs::path& path, bool with_optimizer) {
  write_file_bytes(path, encode_checkpoint(state, with_optimizer));
}

TrainState load_checkpoint(const fs::path& path) { return decode_checkpoint(read_file_bytes(path)); }

}  // namespace adn::train
