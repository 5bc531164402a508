#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "risa/linalg.hpp"

namespace risa::data {

// One party's vertical slice of the virtual dataset. Party 1 is the active
// (label-holding) party. Rows are stored overlap block first, then the
// non-overlapping rows owned by this party, both in ascending sample id.
struct PartyDataset {
  int party_id = 0;  // 1-based
  Matrix rows;
  std::vector<int> sample_ids;               // global ids aligned with `rows`
  std::vector<int> overlap_ids;              // identical across all parties
  std::vector<int> nonoverlap_ids;           // owned by this party only
  std::unordered_map<int, int> row_index;    // global id -> row in `rows`
  std::unordered_map<int, int> labels;       // active party only

  std::size_t dim() const { return rows.cols; }
  std::size_t n_overlap() const { return overlap_ids.size(); }
  std::size_t n_nonoverlap() const { return nonoverlap_ids.size(); }
  bool has(int sample_id) const { return row_index.count(sample_id) != 0; }
  Vector row_of(int sample_id) const;

  bool operator==(const PartyDataset& other) const;
};

using ColRange = std::pair<std::size_t, std::size_t>;  // [first, second)

// Contiguous column ranges covering d columns, one per fraction.
std::vector<ColRange> ranges_from_fractions(std::size_t d, const std::vector<double>& fractions);
std::vector<ColRange> even_ranges(std::size_t d, int num_parties);

// Splits columns across parties; every party initially holds all rows as
// overlapping samples. Labels go to party 1.
std::vector<PartyDataset> vertical_split(const Matrix& table, const std::vector<int>& labels,
                                         const std::vector<ColRange>& ranges);

struct OverlapSplit {
  std::vector<int> overlap;             // ascending
  std::vector<std::vector<int>> owned;  // per party, ascending
};

// Picks round(fraction * n) overlapping rows; the rest are assigned to
// exactly one owner each, split per owner_ratio (default even).
OverlapSplit sample_overlap(int n, double overlap_fraction, int num_parties, std::uint64_t seed,
                            const std::vector<double>& owner_ratio = {});

// Restricts all-rows parties to the given overlap/ownership split. Labels are
// kept for overlap rows, and for party 1's own rows when
// active_nonoverlap_labeled is set.
void apply_overlap(std::vector<PartyDataset>& parties, const OverlapSplit& split,
                   bool active_nonoverlap_labeled);

// Componentwise mean over the overlapping rows only.
Vector party_means(const PartyDataset& ds);

// Means snapshot tied to the overlap split it was computed from.
struct MeansSnapshot {
  std::vector<Vector> means;
  std::uint64_t fingerprint = 0;
};

std::uint64_t overlap_fingerprint(const std::vector<PartyDataset>& parties);
MeansSnapshot compute_means(const std::vector<PartyDataset>& parties);

struct ImputedSample {
  int sample_id = 0;
  int owner_party = 0;
  Vector x;                          // party blocks concatenated in party order
  std::vector<bool> observed_block;  // per party; exactly one set

  Vector block(const std::vector<PartyDataset>& parties, int party_id) const;
};

// x_hat = blocks in positional party order, the owner's observed block in its
// slot and every other slot filled with that party's overlap mean.
ImputedSample impute_mean(const std::vector<PartyDataset>& parties, const MeansSnapshot& means,
                          int owner_party, int sample_id);

struct LabeledTable {
  Matrix x;
  std::vector<int> y;
};

struct SyntheticSpec {
  int n = 2000;
  int num_classes = 2;
  int num_parties = 2;
  std::vector<int> dims;         // per-party block widths
  std::vector<int> informative;  // per-party count of class-informative dims
  int components = 1;            // Gaussian mixture components per class
  double separation = 1.0;       // std of component centers along informative dims
  double sigma = 1.0;            // within-component noise
  std::uint64_t seed = 1;
};

// Gaussian mixture classes. Component centers differ only along each party's
// informative dims, so each block alone carries part of the signal and the
// full table separates the classes. More components per class raise the
// sample complexity without moving the Bayes ceiling much.
LabeledTable gen_synthetic(const SyntheticSpec& spec);

struct SplitOptions {
  int num_parties = 2;
  double overlap_fraction = 0.1;
  double test_fraction = 0.2;
  std::uint64_t seed = 1;
  std::vector<double> owner_ratio;    // default even
  std::vector<ColRange> col_ranges;   // default even by party count
  bool active_nonoverlap_labeled = true;
  int min_overlap = 1;                // callers pass the class count
};

struct SplitManifest {
  int version = 1;
  std::uint64_t seed = 1;
  int num_parties = 2;
  int num_classes = 2;
  double overlap_fraction = 0.1;
  double test_fraction = 0.2;
  bool active_nonoverlap_labeled = true;
  std::vector<ColRange> col_ranges;
  std::vector<int> train_ids;
  std::vector<int> test_ids;
  std::vector<int> overlap_ids;
  std::vector<std::vector<int>> owned_ids;
};

// Everything one experiment needs: training-side parties, the fully observed
// test split, and the simulator-side ground truth for every row.
struct SplitBundle {
  SplitManifest manifest;
  std::vector<PartyDataset> parties;
  std::vector<Matrix> test_blocks;  // per party, rows aligned with manifest.test_ids
  std::vector<int> test_labels;
  std::unordered_map<int, int> truth;

  int num_classes() const { return manifest.num_classes; }
  int num_parties() const { return manifest.num_parties; }
};

SplitBundle make_bundle(const LabeledTable& table, const SplitOptions& opt);
void save_bundle(const SplitBundle& bundle, const std::string& dir);
SplitBundle load_bundle(const std::string& dir);

// Per-party feature rows for ids every party holds (overlap rows).
std::vector<Matrix> gather_blocks(const std::vector<PartyDataset>& parties,
                                  const std::vector<int>& ids);

}  // namespace risa::data
