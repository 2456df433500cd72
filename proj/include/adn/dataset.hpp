#pragma once

// On-disk dataset layout:
//
//   <root>/manifest.tsv              id, seed, group, metal_pixels
//   <root>/trainA/<id>_xa.adnt       artifact-affected images only
//   <root>/trainB/<id>_x.adnt        artifact-free images only
//   <root>/test/<id>_{xa,x,mask}.adnt
//
// trainA and trainB come from disjoint phantoms, so the two training groups
// carry no anatomical correspondence. All images are HU, shape [H, W].

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "adn/ctsim.hpp"

namespace adn::data {

namespace fs = std::filesystem;

enum class Group { trainA, trainB, test };
std::string group_name(Group g);

struct ManifestRow {
  std::string id;
  std::uint64_t seed = 0;
  Group group = Group::test;
  std::int64_t metal_pixels = 0;
};

struct DatasetSpec {
  int train_count = 400;  // split evenly between trainA and trainB
  int test_count = 40;
  int size = 128;
  std::uint64_t seed = 0;
  double metal_probability = 1.0;  // chance that a trainA/test phantom gets metal
};

/// Synthesizes the full directory tree. Deterministic in `spec`; samples are
/// generated in parallel but every file depends only on its own seed.
std::vector<ManifestRow> write_dataset(const fs::path& root, const DatasetSpec& spec);

std::vector<ManifestRow> read_manifest(const fs::path& root);

/// Sorted ids of images found in one group directory.
std::vector<std::string> list_group(const fs::path& root, Group g);

struct TestPair {
  std::string id;
  Tensor artifact;  // HU
  Tensor clean;     // HU
  Mask metal_mask;
};

TestPair load_test_pair(const fs::path& root, const std::string& id);

/// One unpaired draw, already mapped to [-1, 1] and stacked on the batch axis.
struct Batch {
  Tensor artifact;  // [B/2, 1, H, W]
  Tensor clean;     // [B/2, 1, H, W]
  std::vector<std::string> artifact_ids;
  std::vector<std::string> clean_ids;
};

/// Draws from the trainA and trainB listings only; the manifest is never read.
/// draw(seed, step, n) is a pure function of its arguments.
class UnpairedSampler {
 public:
  explicit UnpairedSampler(const fs::path& root);

  std::size_t artifact_count() const { return artifact_.size(); }
  std::size_t clean_count() const { return clean_.size(); }
  std::int64_t image_size() const { return size_; }

  Batch draw(std::uint64_t seed, std::int64_t step, int batch_size) const;

 private:
  struct Entry {
    std::string id;
    Tensor unit;  // [H, W] in [-1, 1]
  };
  std::vector<Entry> artifact_;
  std::vector<Entry> clean_;
  std::int64_t size_ = 0;
};

}  // namespace adn::data
