#include "risa/dataops.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "risa/csv.hpp"
#include "risa/error.hpp"
#include "risa/rng.hpp"

namespace risa::data {

namespace fs = std::filesystem;
using nlohmann::json;

Vector PartyDataset::row_of(int sample_id) const {
  auto it = row_index.find(sample_id);
  if (it == row_index.end())
    throw ContractViolation("PartyDataset: sample " + std::to_string(sample_id) +
                            " not held by party " + std::to_string(party_id));
  return rows.row(static_cast<std::size_t>(it->second));
}

bool PartyDataset::operator==(const PartyDataset& other) const {
  return party_id == other.party_id && sample_ids == other.sample_ids &&
         overlap_ids == other.overlap_ids && nonoverlap_ids == other.nonoverlap_ids &&
         rows.rows == other.rows.rows && rows.cols == other.rows.cols &&
         rows.data == other.rows.data && labels == other.labels;
}

std::vector<ColRange> ranges_from_fractions(std::size_t d, const std::vector<double>& fractions) {
  if (fractions.empty()) throw ContractViolation("ranges_from_fractions: no fractions");
  std::vector<ColRange> ranges;
  std::size_t start = 0;
  for (std::size_t m = 0; m < fractions.size(); ++m) {
    std::size_t width;
    if (m + 1 == fractions.size()) {
      width = d - start;
    } else {
      width = static_cast<std::size_t>(std::llround(fractions[m] * static_cast<double>(d)));
    }
    if (width == 0 || start + width > d)
      throw ContractViolation("ranges_from_fractions: empty or overflowing column block");
    ranges.emplace_back(start, start + width);
    start += width;
  }
  if (start != d) throw ContractViolation("ranges_from_fractions: fractions do not partition columns");
  return ranges;
}

std::vector<ColRange> even_ranges(std::size_t d, int num_parties) {
  if (num_parties <= 0) throw ContractViolation("even_ranges: bad party count");
  std::vector<double> fractions(static_cast<std::size_t>(num_parties),
                                1.0 / static_cast<double>(num_parties));
  return ranges_from_fractions(d, fractions);
}

namespace {

std::vector<PartyDataset> build_parties(const Matrix& table, const std::vector<int>& ids,
                                        const std::unordered_map<int, int>& labels,
                                        const std::vector<ColRange>& ranges) {
  if (ranges.empty()) throw ContractViolation("vertical_split: no column ranges");
  std::size_t covered = 0;
  for (const auto& [lo, hi] : ranges) {
    if (hi <= lo || hi > table.cols) throw ContractViolation("vertical_split: empty column block");
    covered += hi - lo;
  }
  if (covered != table.cols)
    throw ContractViolation("vertical_split: column blocks do not partition the table");

  std::vector<PartyDataset> parties;
  parties.reserve(ranges.size());
  for (std::size_t m = 0; m < ranges.size(); ++m) {
    const auto [lo, hi] = ranges[m];
    PartyDataset ds;
    ds.party_id = static_cast<int>(m + 1);
    ds.rows = Matrix(table.rows, hi - lo);
    for (std::size_t r = 0; r < table.rows; ++r)
      for (std::size_t c = lo; c < hi; ++c) ds.rows(r, c - lo) = table(r, c);
    ds.sample_ids = ids;
    ds.overlap_ids = ids;  // all rows overlap until an overlap split is applied
    for (std::size_t r = 0; r < ids.size(); ++r) ds.row_index[ids[r]] = static_cast<int>(r);
    if (ds.party_id == 1) ds.labels = labels;
    parties.push_back(std::move(ds));
  }
  return parties;
}

}  // namespace

std::vector<PartyDataset> vertical_split(const Matrix& table, const std::vector<int>& labels,
                                         const std::vector<ColRange>& ranges) {
  std::vector<int> ids(table.rows);
  std::iota(ids.begin(), ids.end(), 0);
  std::unordered_map<int, int> label_map;
  if (!labels.empty()) {
    if (labels.size() != table.rows)
      throw ContractViolation("vertical_split: label count does not match rows");
    for (std::size_t i = 0; i < labels.size(); ++i) label_map[static_cast<int>(i)] = labels[i];
  }
  return build_parties(table, ids, label_map, ranges);
}

OverlapSplit sample_overlap(int n, double overlap_fraction, int num_parties, std::uint64_t seed,
                            const std::vector<double>& owner_ratio) {
  if (n <= 0) throw ContractViolation("sample_overlap: no samples");
  if (!(overlap_fraction > 0.0) || overlap_fraction > 1.0)
    throw ConfigError("sample_overlap: overlap_fraction must be in (0, 1]");
  if (num_parties < 1) throw ContractViolation("sample_overlap: bad party count");
  std::vector<double> ratio = owner_ratio;
  if (ratio.empty()) ratio.assign(static_cast<std::size_t>(num_parties),
                                  1.0 / static_cast<double>(num_parties));
  if (ratio.size() != static_cast<std::size_t>(num_parties))
    throw ConfigError("sample_overlap: owner_ratio size must equal party count");
  double ratio_sum = 0.0;
  for (double r : ratio) {
    if (r < 0.0) throw ConfigError("sample_overlap: negative owner ratio");
    ratio_sum += r;
  }
  if (!(ratio_sum > 0.0)) throw ConfigError("sample_overlap: owner ratios sum to zero");

  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  auto rng = make_rng(seed, "overlap-split");
  std::shuffle(ids.begin(), ids.end(), rng);

  const auto n_overlap =
      static_cast<std::size_t>(std::llround(overlap_fraction * static_cast<double>(n)));
  OverlapSplit split;
  split.overlap.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(
                                        std::min(n_overlap, ids.size())));
  std::sort(split.overlap.begin(), split.overlap.end());

  const std::size_t n_rest = ids.size() - split.overlap.size();
  // largest-remainder apportionment of the remaining rows among owners
  std::vector<std::size_t> counts(ratio.size(), 0);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t m = 0; m < ratio.size(); ++m) {
    const double exact = static_cast<double>(n_rest) * ratio[m] / ratio_sum;
    counts[m] = static_cast<std::size_t>(exact);
    assigned += counts[m];
    remainders.emplace_back(exact - std::floor(exact), m);
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t i = 0; assigned < n_rest; ++i, ++assigned) ++counts[remainders[i].second];

  split.owned.resize(ratio.size());
  std::size_t cursor = split.overlap.size();
  for (std::size_t m = 0; m < ratio.size(); ++m) {
    split.owned[m].assign(ids.begin() + static_cast<std::ptrdiff_t>(cursor),
                          ids.begin() + static_cast<std::ptrdiff_t>(cursor + counts[m]));
    std::sort(split.owned[m].begin(), split.owned[m].end());
    cursor += counts[m];
  }
  return split;
}

void apply_overlap(std::vector<PartyDataset>& parties, const OverlapSplit& split,
                   bool active_nonoverlap_labeled) {
  if (parties.size() != split.owned.size())
    throw ContractViolation("apply_overlap: party count mismatch");
  for (std::size_t m = 0; m < parties.size(); ++m) {
    PartyDataset& ds = parties[m];
    std::vector<int> keep = split.overlap;
    keep.insert(keep.end(), split.owned[m].begin(), split.owned[m].end());
    Matrix rows(keep.size(), ds.dim());
    std::unordered_map<int, int> row_index;
    for (std::size_t r = 0; r < keep.size(); ++r) {
      rows.set_row(r, ds.row_of(keep[r]));
      row_index[keep[r]] = static_cast<int>(r);
    }
    std::unordered_map<int, int> labels;
    if (ds.party_id == 1) {
      for (int id : split.overlap) {
        auto it = ds.labels.find(id);
        if (it != ds.labels.end()) labels[id] = it->second;
      }
      if (active_nonoverlap_labeled) {
        for (int id : split.owned[m]) {
          auto it = ds.labels.find(id);
          if (it != ds.labels.end()) labels[id] = it->second;
        }
      }
    }
    ds.rows = std::move(rows);
    ds.sample_ids = std::move(keep);
    ds.overlap_ids = split.overlap;
    ds.nonoverlap_ids = split.owned[m];
    ds.row_index = std::move(row_index);
    ds.labels = std::move(labels);
  }
}

Vector party_means(const PartyDataset& ds) {
  if (ds.overlap_ids.empty())
    throw ContractViolation("party_means: no overlapping rows");
  Vector mean(ds.dim(), 0.0);
  for (int id : ds.overlap_ids) {
    const auto r = static_cast<std::size_t>(ds.row_index.at(id));
    for (std::size_t c = 0; c < ds.dim(); ++c) mean[c] += ds.rows(r, c);
  }
  for (double& v : mean) v /= static_cast<double>(ds.overlap_ids.size());
  return mean;
}

std::uint64_t overlap_fingerprint(const std::vector<PartyDataset>& parties) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ULL;
  };
  mix(parties.size());
  for (const auto& ds : parties) {
    mix(static_cast<std::uint64_t>(ds.party_id));
    mix(ds.dim());
    for (int id : ds.overlap_ids) mix(static_cast<std::uint64_t>(id) + 0x9e37ULL);
  }
  return h;
}

MeansSnapshot compute_means(const std::vector<PartyDataset>& parties) {
  MeansSnapshot snapshot;
  snapshot.means.reserve(parties.size());
  for (const auto& ds : parties) snapshot.means.push_back(party_means(ds));
  snapshot.fingerprint = overlap_fingerprint(parties);
  return snapshot;
}

Vector ImputedSample::block(const std::vector<PartyDataset>& parties, int party_id) const {
  std::size_t offset = 0;
  for (const auto& ds : parties) {
    if (ds.party_id == party_id)
      return Vector(x.begin() + static_cast<std::ptrdiff_t>(offset),
                    x.begin() + static_cast<std::ptrdiff_t>(offset + ds.dim()));
    offset += ds.dim();
  }
  throw ContractViolation("ImputedSample::block: unknown party");
}

ImputedSample impute_mean(const std::vector<PartyDataset>& parties, const MeansSnapshot& means,
                          int owner_party, int sample_id) {
  if (means.means.size() != parties.size())
    throw ContractViolation("impute_mean: means/party count mismatch");
  if (means.fingerprint != overlap_fingerprint(parties))
    throw StateError("impute_mean: stale means (overlap split changed)");
  const auto owner_index = static_cast<std::size_t>(owner_party - 1);
  if (owner_party < 1 || owner_index >= parties.size())
    throw ContractViolation("impute_mean: unknown owner party");

  ImputedSample sample;
  sample.sample_id = sample_id;
  sample.owner_party = owner_party;
  sample.observed_block.assign(parties.size(), false);
  sample.observed_block[owner_index] = true;
  for (std::size_t m = 0; m < parties.size(); ++m) {
    const Vector block =
        m == owner_index ? parties[m].row_of(sample_id) : means.means[m];
    sample.x.insert(sample.x.end(), block.begin(), block.end());
  }
  return sample;
}

LabeledTable gen_synthetic(const SyntheticSpec& spec) {
  if (spec.n <= 0 || spec.num_classes < 2 || spec.num_parties < 1)
    throw ConfigError("gen_synthetic: need n > 0, K >= 2, M >= 1");
  if (spec.dims.size() != static_cast<std::size_t>(spec.num_parties) ||
      spec.informative.size() != static_cast<std::size_t>(spec.num_parties))
    throw ConfigError("gen_synthetic: dims/informative must list one entry per party");
  std::size_t total_dim = 0;
  for (std::size_t m = 0; m < spec.dims.size(); ++m) {
    if (spec.informative[m] < 1)
      throw ConfigError("gen_synthetic: every party needs at least one informative dim");
    if (spec.dims[m] < spec.informative[m])
      throw ConfigError("gen_synthetic: informative dims exceed block width");
    total_dim += static_cast<std::size_t>(spec.dims[m]);
  }

  auto rng = make_rng(spec.seed, "synthetic");
  std::normal_distribution<double> normal(0.0, 1.0);

  // class centers: per party, nonzero only along the informative dims
  std::vector<std::vector<Vector>> centers(spec.dims.size());
  for (std::size_t m = 0; m < spec.dims.size(); ++m) {
    centers[m].resize(static_cast<std::size_t>(spec.num_classes));
    for (int k = 0; k < spec.num_classes; ++k) {
      Vector c(static_cast<std::size_t>(spec.dims[m]), 0.0);
      for (int j = 0; j < spec.informative[m]; ++j)
        c[static_cast<std::size_t>(j)] = spec.separation * normal(rng);
      centers[m][static_cast<std::size_t>(k)] = std::move(c);
    }
  }

  LabeledTable table;
  table.y.resize(static_cast<std::size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) table.y[static_cast<std::size_t>(i)] = i % spec.num_classes;
  std::shuffle(table.y.begin(), table.y.end(), rng);

  table.x = Matrix(static_cast<std::size_t>(spec.n), total_dim);
  for (std::size_t i = 0; i < table.x.rows; ++i) {
    const auto k = static_cast<std::size_t>(table.y[i]);
    std::size_t col = 0;
    for (std::size_t m = 0; m < spec.dims.size(); ++m) {
      for (int j = 0; j < spec.dims[m]; ++j, ++col)
        table.x(i, col) =
            centers[m][k][static_cast<std::size_t>(j)] + spec.sigma * normal(rng);
    }
  }
  return table;
}

SplitBundle make_bundle(const LabeledTable& table, const SplitOptions& opt) {
  const std::size_t n = table.x.rows;
  if (n == 0) throw DataError("make_bundle: empty table");
  if (table.y.size() != n) throw DataError("make_bundle: label count does not match rows");
  if (opt.num_parties < 1) throw ConfigError("make_bundle: bad party count");

  int num_classes = 0;
  for (int y : table.y) {
    if (y < 0) throw DataError("make_bundle: negative class label");
    num_classes = std::max(num_classes, y + 1);
  }
  if (num_classes < 2) throw DataError("make_bundle: need at least two classes");

  std::vector<ColRange> ranges =
      opt.col_ranges.empty() ? even_ranges(table.x.cols, opt.num_parties) : opt.col_ranges;
  if (ranges.size() != static_cast<std::size_t>(opt.num_parties))
    throw ConfigError("make_bundle: column ranges must match party count");

  // train/test split; test rows stay fully observed
  if (!(opt.test_fraction >= 0.0) || opt.test_fraction >= 1.0)
    throw ConfigError("make_bundle: test_fraction must be in [0, 1)");
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  auto rng = make_rng(opt.seed, "test-split");
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto n_test =
      static_cast<std::size_t>(std::llround(opt.test_fraction * static_cast<double>(n)));
  std::vector<int> test_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<int> train_ids(ids.begin() + static_cast<std::ptrdiff_t>(n_test), ids.end());
  std::sort(test_ids.begin(), test_ids.end());
  std::sort(train_ids.begin(), train_ids.end());
  if (train_ids.empty()) throw ConfigError("make_bundle: no training rows left");

  // overlap split over training rows
  OverlapSplit positional = sample_overlap(static_cast<int>(train_ids.size()),
                                           opt.overlap_fraction, opt.num_parties, opt.seed,
                                           opt.owner_ratio);
  if (positional.overlap.size() < static_cast<std::size_t>(std::max(opt.min_overlap, 1)))
    throw ConfigError("make_bundle: overlap fraction yields only " +
                      std::to_string(positional.overlap.size()) +
                      " overlapping samples; cannot train");
  OverlapSplit split;
  split.overlap.reserve(positional.overlap.size());
  for (int pos : positional.overlap) split.overlap.push_back(train_ids[static_cast<std::size_t>(pos)]);
  split.owned.resize(positional.owned.size());
  for (std::size_t m = 0; m < positional.owned.size(); ++m)
    for (int pos : positional.owned[m])
      split.owned[m].push_back(train_ids[static_cast<std::size_t>(pos)]);

  // training-side parties
  Matrix train_x(train_ids.size(), table.x.cols);
  std::unordered_map<int, int> label_map;
  for (std::size_t r = 0; r < train_ids.size(); ++r) {
    const auto src = static_cast<std::size_t>(train_ids[r]);
    for (std::size_t c = 0; c < table.x.cols; ++c) train_x(r, c) = table.x(src, c);
    label_map[train_ids[r]] = table.y[src];
  }
  std::vector<PartyDataset> parties = build_parties(train_x, train_ids, label_map, ranges);
  apply_overlap(parties, split, opt.active_nonoverlap_labeled);

  SplitBundle bundle;
  bundle.parties = std::move(parties);
  bundle.manifest.seed = opt.seed;
  bundle.manifest.num_parties = opt.num_parties;
  bundle.manifest.num_classes = num_classes;
  bundle.manifest.overlap_fraction = opt.overlap_fraction;
  bundle.manifest.test_fraction = opt.test_fraction;
  bundle.manifest.active_nonoverlap_labeled = opt.active_nonoverlap_labeled;
  bundle.manifest.col_ranges = ranges;
  bundle.manifest.train_ids = train_ids;
  bundle.manifest.test_ids = test_ids;
  bundle.manifest.overlap_ids = split.overlap;
  bundle.manifest.owned_ids = split.owned;

  bundle.test_blocks.reserve(ranges.size());
  for (const auto& [lo, hi] : ranges) {
    Matrix block(test_ids.size(), hi - lo);
    for (std::size_t r = 0; r < test_ids.size(); ++r) {
      const auto src = static_cast<std::size_t>(test_ids[r]);
      for (std::size_t c = lo; c < hi; ++c) block(r, c - lo) = table.x(src, c);
    }
    bundle.test_blocks.push_back(std::move(block));
  }
  bundle.test_labels.reserve(test_ids.size());
  for (int id : test_ids) bundle.test_labels.push_back(table.y[static_cast<std::size_t>(id)]);
  for (std::size_t i = 0; i < n; ++i) bundle.truth[static_cast<int>(i)] = table.y[i];
  return bundle;
}

namespace {

json ranges_to_json(const std::vector<ColRange>& ranges) {
  json arr = json::array();
  for (const auto& [lo, hi] : ranges) arr.push_back({lo, hi});
  return arr;
}

std::vector<ColRange> ranges_from_json(const json& arr) {
  std::vector<ColRange> ranges;
  for (const auto& r : arr) ranges.emplace_back(r.at(0).get<std::size_t>(), r.at(1).get<std::size_t>());
  return ranges;
}

}  // namespace

void save_bundle(const SplitBundle& bundle, const std::string& dir) {
  fs::create_directories(dir);
  const auto& m = bundle.manifest;

  json manifest;
  manifest["version"] = m.version;
  manifest["seed"] = m.seed;
  manifest["num_parties"] = m.num_parties;
  manifest["num_classes"] = m.num_classes;
  manifest["overlap_fraction"] = m.overlap_fraction;
  manifest["test_fraction"] = m.test_fraction;
  manifest["active_nonoverlap_labeled"] = m.active_nonoverlap_labeled;
  manifest["col_ranges"] = ranges_to_json(m.col_ranges);
  manifest["train_ids"] = m.train_ids;
  manifest["test_ids"] = m.test_ids;
  manifest["overlap_ids"] = m.overlap_ids;
  manifest["owned_ids"] = m.owned_ids;
  std::ofstream out(fs::path(dir) / "manifest.json");
  out << manifest.dump(2) << '\n';
  if (!out) throw DataError("cannot write manifest in " + dir);

  for (const auto& ds : bundle.parties) {
    io::CsvTable csv;
    csv.header = {"sample_id", "overlap"};
    if (ds.party_id == 1) csv.header.push_back("label");
    for (std::size_t c = 0; c < ds.dim(); ++c) csv.header.push_back("f" + std::to_string(c));
    std::set<int> overlap(ds.overlap_ids.begin(), ds.overlap_ids.end());
    for (std::size_t r = 0; r < ds.rows.rows; ++r) {
      const int id = ds.sample_ids[r];
      std::vector<std::string> row = {std::to_string(id),
                                      overlap.count(id) ? "1" : "0"};
      if (ds.party_id == 1) {
        auto it = ds.labels.find(id);
        row.push_back(std::to_string(it == ds.labels.end() ? -1 : it->second));
      }
      for (std::size_t c = 0; c < ds.dim(); ++c) row.push_back(io::format_double(ds.rows(r, c)));
      csv.rows.push_back(std::move(row));
    }
    io::write_csv((fs::path(dir) / ("party_" + std::to_string(ds.party_id) + ".csv")).string(),
                  csv);
  }

  {
    io::CsvTable csv;
    csv.header = {"sample_id", "label"};
    std::size_t total_dim = 0;
    for (const auto& block : bundle.test_blocks) total_dim += block.cols;
    for (std::size_t c = 0; c < total_dim; ++c) csv.header.push_back("f" + std::to_string(c));
    for (std::size_t r = 0; r < m.test_ids.size(); ++r) {
      std::vector<std::string> row = {std::to_string(m.test_ids[r]),
                                      std::to_string(bundle.test_labels[r])};
      for (const auto& block : bundle.test_blocks)
        for (std::size_t c = 0; c < block.cols; ++c) row.push_back(io::format_double(block(r, c)));
      csv.rows.push_back(std::move(row));
    }
    io::write_csv((fs::path(dir) / "test.csv").string(), csv);
  }

  {
    io::CsvTable csv;
    csv.header = {"sample_id", "label"};
    std::vector<int> ids;
    ids.reserve(bundle.truth.size());
    for (const auto& [id, _] : bundle.truth) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    for (int id : ids)
      csv.rows.push_back({std::to_string(id), std::to_string(bundle.truth.at(id))});
    io::write_csv((fs::path(dir) / "truth.csv").string(), csv);
  }
}

SplitBundle load_bundle(const std::string& dir) {
  const fs::path root(dir);
  std::ifstream in(root / "manifest.json");
  if (!in) throw DataError("cannot open manifest in " + dir);
  json manifest = json::parse(in);

  SplitBundle bundle;
  auto& m = bundle.manifest;
  m.version = manifest.at("version").get<int>();
  m.seed = manifest.at("seed").get<std::uint64_t>();
  m.num_parties = manifest.at("num_parties").get<int>();
  m.num_classes = manifest.at("num_classes").get<int>();
  m.overlap_fraction = manifest.at("overlap_fraction").get<double>();
  m.test_fraction = manifest.at("test_fraction").get<double>();
  m.active_nonoverlap_labeled = manifest.at("active_nonoverlap_labeled").get<bool>();
  m.col_ranges = ranges_from_json(manifest.at("col_ranges"));
  m.train_ids = manifest.at("train_ids").get<std::vector<int>>();
  m.test_ids = manifest.at("test_ids").get<std::vector<int>>();
  m.overlap_ids = manifest.at("overlap_ids").get<std::vector<int>>();
  m.owned_ids = manifest.at("owned_ids").get<std::vector<std::vector<int>>>();

  for (int p = 1; p <= m.num_parties; ++p) {
    const auto path = root / ("party_" + std::to_string(p) + ".csv");
    io::CsvTable csv = io::read_csv(path.string());
    const std::size_t meta = p == 1 ? 3 : 2;  // sample_id, overlap[, label]
    const std::size_t dim = csv.header.size() - meta;
    PartyDataset ds;
    ds.party_id = p;
    ds.rows = Matrix(csv.rows.size(), dim);
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
      const auto& row = csv.rows[r];
      const int id = std::stoi(row[0]);
      ds.sample_ids.push_back(id);
      ds.row_index[id] = static_cast<int>(r);
      if (p == 1) {
        const int label = std::stoi(row[2]);
        if (label >= 0) ds.labels[id] = label;
      }
      for (std::size_t c = 0; c < dim; ++c) ds.rows(r, c) = std::stod(row[meta + c]);
    }
    ds.overlap_ids = m.overlap_ids;
    ds.nonoverlap_ids = m.owned_ids[static_cast<std::size_t>(p - 1)];
    bundle.parties.push_back(std::move(ds));
  }

  {
    io::CsvTable csv = io::read_csv((root / "test.csv").string());
    std::vector<std::size_t> feature_cols;
    for (std::size_t c = 2; c < csv.header.size(); ++c) feature_cols.push_back(c);
    Matrix features = io::to_matrix(csv, feature_cols);
    for (const auto& [lo, hi] : m.col_ranges) {
      Matrix block(features.rows, hi - lo);
      for (std::size_t r = 0; r < features.rows; ++r)
        for (std::size_t c = lo; c < hi; ++c) block(r, c - lo) = features(r, c);
      bundle.test_blocks.push_back(std::move(block));
    }
    for (const auto& row : csv.rows) bundle.test_labels.push_back(std::stoi(row[1]));
  }

  {
    io::CsvTable csv = io::read_csv((root / "truth.csv").string());
    for (const auto& row : csv.rows) bundle.truth[std::stoi(row[0])] = std::stoi(row[1]);
  }
  return bundle;
}

std::vector<Matrix> gather_blocks(const std::vector<PartyDataset>& parties,
                                  const std::vector<int>& ids) {
  std::vector<Matrix> blocks;
  blocks.reserve(parties.size());
  for (const auto& ds : parties) {
    Matrix block(ids.size(), ds.dim());
    for (std::size_t r = 0; r < ids.size(); ++r) block.set_row(r, ds.row_of(ids[r]));
    blocks.push_back(std::move(block));
  }
  return blocks;
}

}  // namespace risa::data
