#include "adn/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "adn/binary.hpp"
#include "adn/parallel.hpp"
#include "adn/rng.hpp"
#include "adn/tensor_io.hpp"

namespace adn::data {

namespace {

const char* kGroupDirs[] = {"trainA", "trainB", "test"};

std::string sample_id(Group g, int index) {
  static const char prefix[] = {'a', 'b', 't'};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%c%05d", prefix[static_cast<int>(g)], index);
  return buf;
}

Group parse_group(const std::string& s) {
  for (int g = 0; g < 3; ++g) {
    if (s == kGroupDirs[g]) return static_cast<Group>(g);
  }
  throw ArgumentError("unknown dataset group '" + s + "'");
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() > suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::string group_name(Group g) { return kGroupDirs[static_cast<int>(g)]; }

std::vector<ManifestRow> write_dataset(const fs::path& root, const DatasetSpec& spec) {
  if (spec.train_count < 2 || spec.train_count % 2 != 0) {
    throw ArgumentError("dataset: training count must be a positive even number, got " +
                        std::to_string(spec.train_count));
  }
  if (spec.test_count < 1) throw ArgumentError("dataset: test count must be >= 1");
  if (spec.size < 32 || spec.size % 4 != 0) {
    throw ArgumentError("dataset: size must be >= 32 and divisible by 4, got " + std::to_string(spec.size));
  }
  if (!(spec.metal_probability >= 0.0 && spec.metal_probability <= 1.0)) {
    throw ArgumentError("dataset: metal probability must lie in [0, 1]");
  }
  for (const char* d : kGroupDirs) fs::create_directories(root / d);

  const int half = spec.train_count / 2;
  std::vector<ManifestRow> rows;
  for (int i = 0; i < half; ++i) rows.push_back({sample_id(Group::trainA, i), 0, Group::trainA, 0});
  for (int i = 0; i < half; ++i) rows.push_back({sample_id(Group::trainB, i), 0, Group::trainB, 0});
  for (int i = 0; i < spec.test_count; ++i) rows.push_back({sample_id(Group::test, i), 0, Group::test, 0});
  for (std::size_t k = 0; k < rows.size(); ++k) rows[k].seed = mix_seed(spec.seed, k);

  parallel_for(rows.size(), [&](std::size_t k) {
    ManifestRow& row = rows[k];
    ct::SynthesisConfig cfg;
    cfg.size = spec.size;
    std::mt19937_64 coin(mix_seed(row.seed, 7));
    if (std::uniform_real_distribution<double>(0.0, 1.0)(coin) >= spec.metal_probability) {
      cfg.phantom.min_metal = 0;
      cfg.phantom.max_metal = 0;
    }
    const ct::PairedSample s = ct::synthesize_pair(row.seed, cfg);
    row.metal_pixels = s.metal_mask.count();
    const fs::path dir = root / group_name(row.group);
    if (row.group != Group::trainB) write_adnt(dir / (row.id + "_xa.adnt"), s.artifact);
    if (row.group != Group::trainA) write_adnt(dir / (row.id + "_x.adnt"), s.clean);
    if (row.group == Group::test) write_adnt(dir / (row.id + "_mask.adnt"), s.metal_mask.to_tensor());
  });

  std::ostringstream out;
  out << "id\tseed\tgroup\tmetal_pixels\n";
  for (const auto& r : rows) out << r.id << '\t' << r.seed << '\t' << group_name(r.group) << '\t' << r.metal_pixels << '\n';
  const std::string text = out.str();
  write_file_bytes(root / "manifest.tsv",
                   {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  return rows;
}

std::vector<ManifestRow> read_manifest(const fs::path& root) {
  std::ifstream in(root / "manifest.tsv");
  if (!in) throw std::runtime_error("cannot open " + (root / "manifest.tsv").string());
  std::vector<ManifestRow> rows;
  std::string line;
  std::uint64_t offset = 0;
  bool header = true;
  while (std::getline(in, line)) {
    const std::uint64_t here = offset;
    offset += line.size() + 1;
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::istringstream fields(line);
    ManifestRow r;
    std::string group;
    if (!(fields >> r.id >> r.seed >> group >> r.metal_pixels)) throw FormatError("malformed manifest row", here);
    r.group = parse_group(group);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<std::string> list_group(const fs::path& root, Group g) {
  const fs::path dir = root / group_name(g);
  if (!fs::is_directory(dir)) throw std::runtime_error("missing dataset directory " + dir.string());
  const std::string suffix = g == Group::trainB ? "_x.adnt" : "_xa.adnt";
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && ends_with(name, suffix)) ids.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

TestPair load_test_pair(const fs::path& root, const std::string& id) {
  const fs::path dir = root / group_name(Group::test);
  TestPair p;
  p.id = id;
  p.artifact = read_adnt(dir / (id + "_xa.adnt"));
  p.clean = read_adnt(dir / (id + "_x.adnt"));
  p.metal_mask = Mask::from_tensor(read_adnt(dir / (id + "_mask.adnt")));
  if (p.artifact.rank() != 2 || p.artifact.shape() != p.clean.shape() ||
      p.metal_mask.rows() != p.artifact.dim(0) || p.metal_mask.cols() != p.artifact.dim(1)) {
    throw DimensionError("test pair '" + id + "' has inconsistent shapes");
  }
  return p;
}

UnpairedSampler::UnpairedSampler(const fs::path& root) {
  auto load = [&](Group g, const char* suffix, std::vector<Entry>& into) {
    for (const auto& id : list_group(root, g)) {
      Tensor hu = read_adnt(root / group_name(g) / (id + suffix));
      if (hu.rank() != 2 || hu.dim(0) != hu.dim(1)) {
        throw DimensionError("training image '" + id + "' must be square [H, W], got " + shape_str(hu.shape()));
      }
      if (size_ == 0) size_ = hu.dim(0);
      if (hu.dim(0) != size_) throw DimensionError("training images differ in size");
      into.push_back({id, hu_to_unit(hu)});
    }
    if (into.empty()) throw std::runtime_error("no training images in " + (root / group_name(g)).string());
  };
  load(Group::trainA, "_xa.adnt", artifact_);
  load(Group::trainB, "_x.adnt", clean_);
}

Batch UnpairedSampler::draw(std::uint64_t seed, std::int64_t step, int batch_size) const {
  if (batch_size < 2 || batch_size % 2 != 0) {
    throw ArgumentError("batch size must be a positive even number, got " + std::to_string(batch_size));
  }
  const int per = batch_size / 2;
  const std::uint64_t base = mix_seed(seed, static_cast<std::uint64_t>(step));
  const auto plane = static_cast<std::size_t>(size_ * size_);
  std::vector<float> a(plane * per), c(plane * per);
  Batch b;
  for (int k = 0; k < per; ++k) {
    const auto& ea = artifact_[mix_seed(base, 2 * k) % artifact_.size()];
    const auto& ec = clean_[mix_seed(base, 2 * k + 1) % clean_.size()];
    std::copy(ea.unit.data().begin(), ea.unit.data().end(), a.begin() + k * plane);
    std::copy(ec.unit.data().begin(), ec.unit.data().end(), c.begin() + k * plane);
    b.artifact_ids.push_back(ea.id);
    b.clean_ids.push_back(ec.id);
  }
  b.artifact = Tensor(Shape{per, 1, size_, size_}, std::move(a));
  b.clean = Tensor(Shape{per, 1, size_, size_}, std::move(c));
  return b;
}

}  // namespace adn::data
