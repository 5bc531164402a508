#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "risa/csv.hpp"
#include "risa/dataops.hpp"
#include "risa/error.hpp"
#include "risa/nn.hpp"
#include "risa/selftrain.hpp"

using namespace risa;
using namespace risa::data;

namespace {

Matrix from_rows(const std::vector<Vector>& rows) {
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) m.set_row(r, rows[r]);
  return m;
}

// two parties, two columns each; rows 0/1 overlap, row 2 owned by party 2
std::vector<PartyDataset> small_split() {
  const Matrix table = from_rows({{1.0, 2.0, 10.0, 20.0},
                                  {3.0, 4.0, 30.0, 40.0},
                                  {9.0, 9.0, 5.0, 6.0}});
  auto parties = vertical_split(table, {0, 1, 0}, even_ranges(4, 2));
  OverlapSplit split;
  split.overlap = {0, 1};
  split.owned = {{}, {2}};
  apply_overlap(parties, split, true);
  return parties;
}

double train_linear_softmax(const Matrix& x, const std::vector<int>& y, int num_classes,
                            int iters) {
  // plain linear softmax classifier; an independent desk-scale probe
  nn::DenseNet net = nn::DenseNet::make(
      x.cols, {static_cast<std::size_t>(num_classes)}, {nn::Activation::linear}, 404);
  for (int it = 0; it < iters; ++it) {
    nn::GradientTape total = net.zero_tape();
    for (std::size_t r = 0; r < x.rows; ++r) {
      const Vector z = net.forward(x.row(r));
      const Vector p = selftrain::softmax(z);
      Vector dz = p;
      dz[static_cast<std::size_t>(y[r])] -= 1.0;
      total.add(net.backward(dz));
    }
    total.scale(1.0 / static_cast<double>(x.rows));
    nn::sgd_step(net, total, 0.5);
  }
  std::size_t correct = 0;
  for (std::size_t r = 0; r < x.rows; ++r)
    if (static_cast<int>(argmax(net.evaluate(x.row(r)))) == y[r]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(x.rows);
}

}  // namespace

TEST_CASE("even vertical split of four columns across two parties") {
  const Matrix table = from_rows({{1.0, 2.0, 3.0, 4.0}, {5.0, 6.0, 7.0, 8.0}});
  const auto parties = vertical_split(table, {0, 1}, even_ranges(4, 2));
  REQUIRE(parties.size() == 2);
  CHECK(parties[0].rows.row(0) == Vector{1.0, 2.0});
  CHECK(parties[1].rows.row(0) == Vector{3.0, 4.0});
  CHECK(parties[0].labels.at(0) == 0);
  CHECK(parties[1].labels.empty());
}

TEST_CASE("explicit column blocks support uneven splits and reconstruct the table") {
  // numeric-vs-categorical style assignment: wide block to party 1
  const Matrix table = from_rows({{1, 2, 3, 4, 5}, {6, 7, 8, 9, 10}, {11, 12, 13, 14, 15}});
  const std::vector<ColRange> ranges = {{0, 3}, {3, 4}, {4, 5}};
  const auto parties = vertical_split(table, {0, 1, 0}, ranges);
  REQUIRE(parties.size() == 3);
  for (std::size_t r = 0; r < table.rows; ++r) {
    Vector rebuilt;
    for (const auto& ds : parties) {
      const Vector block = ds.rows.row(r);
      rebuilt.insert(rebuilt.end(), block.begin(), block.end());
    }
    CHECK(rebuilt == table.row(r));
  }
}

TEST_CASE("empty column blocks are rejected") {
  CHECK_THROWS_AS(ranges_from_fractions(3, {1.0, 0.0}), ContractViolation);
  const Matrix table = from_rows({{1.0, 2.0}});
  CHECK_THROWS_AS(vertical_split(table, {0}, {{0, 2}, {2, 2}}), ContractViolation);
}

TEST_CASE("sample_overlap counting") {
  SUBCASE("fraction 1.0 makes every row overlapping") {
    const OverlapSplit split = sample_overlap(50, 1.0, 2, 7);
    CHECK(split.overlap.size() == 50);
    CHECK(split.owned[0].empty());
    CHECK(split.owned[1].empty());
  }
  SUBCASE("n=100, fraction=0.1 -> 10 overlapping") {
    CHECK(sample_overlap(100, 0.1, 2, 7).overlap.size() == 10);
  }
  SUBCASE("n=1000, fraction=0.01, M=2 -> 10 overlapping, 990 split evenly") {
    const OverlapSplit split = sample_overlap(1000, 0.01, 2, 7);
    CHECK(split.overlap.size() == 10);
    CHECK(split.owned[0].size() == 495);
    CHECK(split.owned[1].size() == 495);
  }
  SUBCASE("owner ratio steers ownership") {
    const OverlapSplit split = sample_overlap(100, 0.2, 2, 7, {3.0, 1.0});
    CHECK(split.owned[0].size() == 60);
    CHECK(split.owned[1].size() == 20);
  }
  SUBCASE("every row lands in exactly one set") {
    const OverlapSplit split = sample_overlap(101, 0.13, 3, 9);
    std::vector<int> seen;
    seen.insert(seen.end(), split.overlap.begin(), split.overlap.end());
    for (const auto& owned : split.owned) seen.insert(seen.end(), owned.begin(), owned.end());
    std::sort(seen.begin(), seen.end());
    for (int i = 0; i < 101; ++i) CHECK(seen[static_cast<std::size_t>(i)] == i);
  }
  SUBCASE("deterministic under the seed") {
    const OverlapSplit a = sample_overlap(200, 0.25, 2, 11);
    const OverlapSplit b = sample_overlap(200, 0.25, 2, 11);
    const OverlapSplit c = sample_overlap(200, 0.25, 2, 12);
    CHECK(a.overlap == b.overlap);
    CHECK(a.owned == b.owned);
    CHECK(a.overlap != c.overlap);
  }
  SUBCASE("bad fraction is a config error") {
    CHECK_THROWS_AS(sample_overlap(10, 0.0, 2, 1), ConfigError);
    CHECK_THROWS_AS(sample_overlap(10, 1.5, 2, 1), ConfigError);
  }
}

TEST_CASE("overlap ids are identical across parties after a split") {
  const auto parties = small_split();
  CHECK(parties[0].overlap_ids == parties[1].overlap_ids);
  CHECK(parties[0].nonoverlap_ids.empty());
  CHECK(parties[1].nonoverlap_ids == std::vector<int>{2});
  CHECK(parties[0].labels.count(2) == 0);  // party 1 does not hold row 2
}

TEST_CASE("party_means uses overlap rows only") {
  SUBCASE("worked case") {
    const auto parties = small_split();
    CHECK(party_means(parties[0]) == Vector{2.0, 3.0});
    CHECK(party_means(parties[1]) == Vector{20.0, 30.0});
  }
  SUBCASE("single overlap row equals that row") {
    PartyDataset ds;
    ds.party_id = 1;
    ds.rows = from_rows({{4.0, 5.0}});
    ds.sample_ids = {0};
    ds.overlap_ids = {0};
    ds.row_index[0] = 0;
    CHECK(party_means(ds) == Vector{4.0, 5.0});
  }
  SUBCASE("empty overlap is rejected") {
    PartyDataset ds;
    ds.party_id = 1;
    ds.rows = Matrix(0, 2);
    CHECK_THROWS_AS(party_means(ds), ContractViolation);
  }
  SUBCASE("matches an independent two-pass summation on random data") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(-10.0, 10.0);
    Matrix rows(1000, 3);
    for (double& v : rows.data) v = unit(rng);
    PartyDataset ds;
    ds.party_id = 2;
    ds.rows = rows;
    for (int i = 0; i < 1000; ++i) {
      ds.sample_ids.push_back(i);
      ds.overlap_ids.push_back(i);
      ds.row_index[i] = i;
    }
    const Vector got = party_means(ds);
    for (std::size_t c = 0; c < 3; ++c) {
      double total = 0.0;
      for (std::size_t r = 0; r < 1000; ++r) total += rows(r, c);
      CHECK(std::abs(got[c] - total / 1000.0) < 1e-12);
    }
  }
  SUBCASE("deleting non-overlap rows does not change the means") {
    const auto parties = small_split();
    const Vector before = party_means(parties[1]);
    PartyDataset trimmed = parties[1];
    trimmed.rows = from_rows({{10.0, 20.0}, {30.0, 40.0}});
    trimmed.sample_ids = {0, 1};
    trimmed.nonoverlap_ids.clear();
    trimmed.row_index = {{0, 0}, {1, 1}};
    CHECK(party_means(trimmed) == before);
  }
}

TEST_CASE("mean imputation concatenates blocks in positional party order") {
  const auto parties = small_split();
  const MeansSnapshot means = compute_means(parties);

  SUBCASE("two parties, owner 2: x_hat = (mean_1, observed_2)") {
    const ImputedSample sample = impute_mean(parties, means, 2, 2);
    CHECK(sample.x == Vector{2.0, 3.0, 5.0, 6.0});
    CHECK(sample.observed_block == std::vector<bool>{false, true});
  }
  SUBCASE("three parties, owner 2 sits in the middle slot") {
    const Matrix table = from_rows({{1.0, 10.0, 100.0}, {3.0, 30.0, 300.0}, {0.0, 77.0, 0.0}});
    auto p3 = vertical_split(table, {0, 1, 0}, {{0, 1}, {1, 2}, {2, 3}});
    OverlapSplit split;
    split.overlap = {0, 1};
    split.owned = {{}, {2}, {}};
    apply_overlap(p3, split, true);
    const MeansSnapshot m3 = compute_means(p3);
    const ImputedSample sample = impute_mean(p3, m3, 2, 2);
    CHECK(sample.x == Vector{2.0, 77.0, 200.0});
    CHECK(sample.observed_block == std::vector<bool>{false, true, false});
  }
  SUBCASE("imputed blocks equal party_means output and never touch the observed block") {
    const ImputedSample sample = impute_mean(parties, means, 2, 2);
    CHECK(sample.block(parties, 1) == party_means(parties[0]));
    CHECK(sample.block(parties, 2) == parties[1].row_of(2));
  }
  SUBCASE("stale means raise a state error") {
    const Matrix table = from_rows({{1.0, 2.0, 10.0, 20.0},
                                    {3.0, 4.0, 30.0, 40.0},
                                    {9.0, 9.0, 5.0, 6.0}});
    auto reparties = vertical_split(table, {0, 1, 0}, even_ranges(4, 2));
    OverlapSplit smaller;
    smaller.overlap = {0};
    smaller.owned = {{1}, {1, 2}};
    // different overlap set: the snapshot fingerprint no longer matches
    smaller.owned = {{}, {1, 2}};
    apply_overlap(reparties, smaller, true);
    CHECK_THROWS_AS(impute_mean(reparties, means, 2, 2), StateError);
  }
}

TEST_CASE("gen_synthetic") {
  SyntheticSpec spec;
  spec.n = 200;
  spec.num_classes = 2;
  spec.num_parties = 2;
  spec.dims = {3, 3};
  spec.informative = {2, 2};
  spec.seed = 42;

  SUBCASE("same seed gives identical bytes") {
    const LabeledTable a = gen_synthetic(spec);
    const LabeledTable b = gen_synthetic(spec);
    CHECK(a.x.data == b.x.data);
    CHECK(a.y == b.y);
    SyntheticSpec other = spec;
    other.seed = 43;
    CHECK(gen_synthetic(other).x.data != a.x.data);
  }
  SUBCASE("zero noise with far-separated centers is linearly separable") {
    SyntheticSpec clean = spec;
    clean.sigma = 0.0;
    clean.separation = 5.0;
    const LabeledTable table = gen_synthetic(clean);
    CHECK(train_linear_softmax(table.x, table.y, clean.num_classes, 200) == 1.0);
  }
  SUBCASE("each party alone is weaker than the full table") {
    SyntheticSpec hard = spec;
    hard.n = 600;
    hard.separation = 0.9;
    hard.sigma = 1.0;
    hard.seed = 3;
    const LabeledTable table = gen_synthetic(hard);
    Matrix party1(table.x.rows, 3);
    for (std::size_t r = 0; r < table.x.rows; ++r)
      for (std::size_t c = 0; c < 3; ++c) party1(r, c) = table.x(r, c);
    const double full = train_linear_softmax(table.x, table.y, 2, 300);
    const double local = train_linear_softmax(party1, table.y, 2, 300);
    CHECK(local < full);
  }
  SUBCASE("every party needs an informative dim") {
    SyntheticSpec bad = spec;
    bad.informative = {2, 0};
    CHECK_THROWS_AS(gen_synthetic(bad), ConfigError);
  }
}

TEST_CASE("csv round-trip with quoting") {
  io::CsvTable table;
  table.header = {"name", "value"};
  table.rows = {{"plain", "1.5"}, {"with,comma", "-2"}, {"with\"quote", "3"}};
  const std::string path = "csv_roundtrip_test.csv";
  io::write_csv(path, table);
  const io::CsvTable back = io::read_csv(path);
  CHECK(back.header == table.header);
  CHECK(back.rows == table.rows);
  std::filesystem::remove(path);
}

TEST_CASE("malformed csv reports the line number") {
  const std::string path = "csv_bad_test.csv";
  {
    std::ofstream out(path);
    out << "a,b\n1,2\n3\n";
  }
  try {
    io::read_csv(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("non-numeric csv cells are data errors") {
  const std::string path = "csv_nonnum_test.csv";
  {
    std::ofstream out(path);
    out << "a,b\n1,x\n";
  }
  const io::CsvTable table = io::read_csv(path);
  CHECK_THROWS_AS(io::to_matrix(table, {0, 1}), DataError);
  std::filesystem::remove(path);
}

TEST_CASE("bundle save/load round-trips exactly") {
  SyntheticSpec spec;
  spec.n = 120;
  spec.num_classes = 2;
  spec.num_parties = 2;
  spec.dims = {3, 2};
  spec.informative = {2, 1};
  spec.seed = 9;
  const LabeledTable table = gen_synthetic(spec);

  SplitOptions opt;
  opt.num_parties = 2;
  opt.overlap_fraction = 0.25;
  opt.test_fraction = 0.2;
  opt.seed = 9;
  opt.min_overlap = 2;
  const SplitBundle bundle = make_bundle(table, opt);

  CHECK(bundle.parties[0].overlap_ids == bundle.parties[1].overlap_ids);
  CHECK(bundle.manifest.train_ids.size() == 96);
  CHECK(bundle.manifest.test_ids.size() == 24);
  CHECK(bundle.manifest.overlap_ids.size() == 24);  // 0.25 * 96

  const std::string dir = "bundle_roundtrip_test";
  save_bundle(bundle, dir);
  const SplitBundle loaded = load_bundle(dir);
  CHECK(loaded.manifest.overlap_ids == bundle.manifest.overlap_ids);
  CHECK(loaded.manifest.train_ids == bundle.manifest.train_ids);
  CHECK(loaded.manifest.test_ids == bundle.manifest.test_ids);
  REQUIRE(loaded.parties.size() == bundle.parties.size());
  for (std::size_t m = 0; m < bundle.parties.size(); ++m)
    CHECK(loaded.parties[m] == bundle.parties[m]);
  for (std::size_t m = 0; m < bundle.test_blocks.size(); ++m)
    CHECK(loaded.test_blocks[m].data == bundle.test_blocks[m].data);
  CHECK(loaded.test_labels == bundle.test_labels);
  CHECK(loaded.truth == bundle.truth);
  std::filesystem::remove_all(dir);
}

TEST_CASE("make_bundle is reproducible and guards the overlap minimum") {
  SyntheticSpec spec;
  spec.n = 100;
  spec.num_classes = 4;
  spec.num_parties = 2;
  spec.dims = {3, 3};
  spec.informative = {2, 2};
  spec.seed = 21;
  const LabeledTable table = gen_synthetic(spec);

  SplitOptions opt;
  opt.num_parties = 2;
  opt.overlap_fraction = 0.1;
  opt.seed = 21;
  opt.min_overlap = 4;
  const SplitBundle a = make_bundle(table, opt);
  const SplitBundle b = make_bundle(table, opt);
  CHECK(a.manifest.overlap_ids == b.manifest.overlap_ids);
  for (std::size_t m = 0; m < a.parties.size(); ++m) CHECK(a.parties[m] == b.parties[m]);

  opt.overlap_fraction = 0.02;  // 80 train rows -> 2 overlapping < K=4
  CHECK_THROWS_AS(make_bundle(table, opt), ConfigError);
}

TEST_CASE("active_nonoverlap_labeled controls label visibility") {
  SyntheticSpec spec;
  spec.n = 100;
  spec.num_classes = 2;
  spec.num_parties = 2;
  spec.dims = {2, 2};
  spec.informative = {1, 1};
  spec.seed = 31;
  const LabeledTable table = gen_synthetic(spec);

  SplitOptions opt;
  opt.num_parties = 2;
  opt.overlap_fraction = 0.2;
  opt.seed = 31;
  SplitBundle labeled = make_bundle(table, opt);
  for (int id : labeled.parties[0].nonoverlap_ids) CHECK(labeled.parties[0].labels.count(id) == 1);

  opt.active_nonoverlap_labeled = false;
  SplitBundle unlabeled = make_bundle(table, opt);
  for (int id : unlabeled.parties[0].nonoverlap_ids)
    CHECK(unlabeled.parties[0].labels.count(id) == 0);
  for (int id : unlabeled.parties[0].overlap_ids)
    CHECK(unlabeled.parties[0].labels.count(id) == 1);
}
