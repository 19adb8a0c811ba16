#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "quadclass/arithmetic.hpp"
#include "quadclass/checksum.hpp"
#include "quadclass/dataset.hpp"
#include "quadclass/error.hpp"
#include "quadclass/invariants.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace quadclass::data;
using quadclass::FormatError;
using quadclass::ValidationError;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("quadclass_test_" + std::to_string(std::rand()) + "_" +
                                        std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

const Dataset& small_123() {
  static const Dataset ds = [] {
    GenerateOptions opt;
    opt.max_D = 20'000;
    opt.classes = {1, 2, 3};
    opt.coeff_bound = 200;
    return generate(opt);
  }();
  return ds;
}

}  // namespace

TEST_CASE("generation on a tiny range matches exhaustive class numbers") {
  GenerateOptions opt;
  opt.max_D = 40;
  opt.classes = {1, 2};
  opt.coeff_bound = 50;
  const auto ds = generate(opt);

  std::vector<Int> expected;
  for (Int d = 2; d <= 40; ++d) {
    if (!quadclass::arith::is_squarefree(static_cast<std::uint64_t>(d))) continue;
    if (quadclass::arith::discriminant(d).D > 40) continue;
    const Int h = quadclass::invariants::class_number(d).h;
    if (h == 1 || h == 2) expected.push_back(d);
  }
  std::vector<Int> got;
  for (const auto& r : ds.records()) got.push_back(r.d);
  CHECK(got == expected);
  for (Int d : {2, 3, 5, 6, 7, 10}) CHECK(std::find(got.begin(), got.end(), d) != got.end());
  for (const auto& r : ds.records())
    if (r.d == 10) CHECK(r.h == 2);
  CHECK(ds.provenance() == Provenance::generated);
}

TEST_CASE("records are internally consistent") {
  const auto& ds = small_123();
  REQUIRE(ds.size() > 4000);
  Int prev = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& r = ds.record(i);
    CAPTURE(r.d);
    REQUIRE(r.d > prev);
    prev = r.d;
    REQUIRE(r.D == (r.d % 4 == 1 ? r.d : 4 * r.d));
    REQUIRE(r.D <= 20'000);
    REQUIRE(ds.label_classes().count(r.h) == 1);
    int nonzero = 0;
    for (Int p : r.p) {
      if (p == 0) continue;
      ++nonzero;
      REQUIRE(r.D % p == 0);
      if (static_cast<std::size_t>(p) <= ds.coeff_bound()) REQUIRE(ds.coefficient(i, static_cast<std::size_t>(p)) == 1);
    }
    REQUIRE(nonzero == r.n_d);
    REQUIRE(r.R > 0);
    REQUIRE((r.h_plus == r.h) == (r.unit_norm == -1));
    REQUIRE(ds.coefficient(i, 1) == 1);
  }
}

TEST_CASE("generation is reproducible and independent of the thread count") {
  GenerateOptions opt;
  opt.max_D = 30'000;
  opt.classes = {1, 2, 3};
  opt.coeff_bound = 100;
  opt.threads = 1;
  const auto a = generate(opt);
  opt.threads = 4;
  const auto b = generate(opt);
  CHECK(a == b);
  CHECK(a.checksum() == b.checksum());
  CHECK(fields_csv(a) == fields_csv(b));
}

TEST_CASE("class three count below 10^5") {
  GenerateOptions opt;
  opt.max_D = 100'000;
  opt.classes = {3};
  opt.coeff_bound = 10;
  CHECK(generate(opt).size() == 1261);
}

TEST_CASE("generate rejects bad bounds") {
  GenerateOptions opt;
  opt.max_D = 4;
  CHECK_THROWS_AS(generate(opt), std::invalid_argument);
  opt.max_D = 100;
  opt.coeff_bound = 0;
  CHECK_THROWS_AS(generate(opt), std::invalid_argument);
  opt.coeff_bound = 10;
  opt.classes = {9};
  CHECK(generate(opt).empty());
}

TEST_CASE("summaries carry the structural zeros") {
  const auto& ds = small_123();
  const auto s = summarize(ds);
  CHECK(s.small_prime_values.at({1, 5, 1}) == 1);
  CHECK(s.ramified.count({1, 3}) == 0);
  CHECK(s.ramified.count({2, 1}) == 0);
  std::size_t total = 0;
  for (const auto& [key, n] : s.ramified) total += n;
  CHECK(total == ds.size());

  const auto tiny = testing::dataset_of({5, 10});
  const auto t = summarize(tiny);
  CHECK(t.ramified.at({1, 1}) == 1);
  CHECK(t.ramified.at({2, 2}) == 1);
  CHECK(t.ramified.size() == 2);

  const std::string csv = ramified_csv(s);
  CHECK(csv.rfind("h,n_d,count\n", 0) == 0);
  CHECK(csv.find("1,3,0\n") != std::string::npos);
  CHECK(csv.find("2,1,0\n") != std::string::npos);
}

TEST_CASE("save and load round-trip bit-exactly") {
  TempDir tmp;
  const auto& ds = small_123();
  const auto sub = ds.subset({0, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 233, 377, 610, 987, 1597, 2584, 4181}, "fib");
  for (const Dataset* d : {&ds, &sub}) {
    save(*d, tmp.path);
    const auto back = load(tmp.path);
    CHECK(back == *d);
    for (std::size_t i = 0; i < d->size(); ++i) {
      REQUIRE(std::bit_cast<std::uint64_t>(back.record(i).R) == std::bit_cast<std::uint64_t>(d->record(i).R));
      REQUIRE(std::bit_cast<std::uint64_t>(back.record(i).S_chi) == std::bit_cast<std::uint64_t>(d->record(i).S_chi));
    }
  }
  // Saving twice gives identical bytes.
  save(sub, tmp.path);
  const auto first = read_all(tmp.path / "coefficients.qcf") + read_all(tmp.path / "fields.csv");
  save(sub, tmp.path);
  CHECK(first == read_all(tmp.path / "coefficients.qcf") + read_all(tmp.path / "fields.csv"));
}

TEST_CASE("corrupt files are rejected") {
  TempDir tmp;
  const auto ds = testing::dataset_of({2, 3, 5, 6, 7}, 30);
  save(ds, tmp.path);
  const auto qcf = read_all(tmp.path / "coefficients.qcf");

  SUBCASE("truncated coefficient file") {
    write_all(tmp.path / "coefficients.qcf", qcf.substr(0, qcf.size() - 5));
    try {
      load(tmp.path);
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("checksum") != std::string::npos);
    }
  }
  SUBCASE("flipped payload byte") {
    auto bad = qcf;
    bad[20] = static_cast<char>(bad[20] ^ 1);
    write_all(tmp.path / "coefficients.qcf", bad);
    CHECK_THROWS_AS(load(tmp.path), ValidationError);
  }
  SUBCASE("format version") {
    auto bad = qcf;
    bad[3] = '2';
    write_all(tmp.path / "coefficients.qcf", bad);
    try {
      load(tmp.path);
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
  }
  SUBCASE("descriptor version") {
    auto desc = read_all(tmp.path / "dataset.json");
    const auto key = desc.find("\"version\"");
    REQUIRE(key != std::string::npos);
    const auto digit = desc.find('1', key);
    desc[digit] = '7';
    write_all(tmp.path / "dataset.json", desc);
    CHECK_THROWS_AS(load(tmp.path), ValidationError);
  }
  SUBCASE("edited metadata") {
    auto fields = read_all(tmp.path / "fields.csv");
    fields.back() = fields.back() == '1' ? '2' : '1';
    fields += "\n";
    write_all(tmp.path / "fields.csv", fields);
    CHECK_THROWS(load(tmp.path));
  }
}

TEST_CASE("coefficient file layout is little-endian") {
  const std::vector<std::uint8_t> matrix{1, 0, 0, 1, 1, 2};
  const auto bytes = encode_coefficients(matrix, 2, 3);
  REQUIRE(bytes.size() == 4 + 4 + 4 + 6 + 8);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "QCF1");
  CHECK(bytes[4] == 2);
  CHECK(bytes[5] == 0);
  CHECK(bytes[8] == 3);
  CHECK(bytes[11] == 0);

  // A hand-assembled file decodes to the same values on any host.
  std::vector<std::uint8_t> hand{'Q', 'C', 'F', '1', 1, 0, 0, 0, 2, 0, 0, 0, 7, 9};
  quadclass::Fnv1a64 h;
  h.update(std::span<const std::uint8_t>(hand));
  std::uint64_t sum = h.digest();
  for (int i = 0; i < 8; ++i) hand.push_back(static_cast<std::uint8_t>(sum >> (8 * i)));
  const auto dec = decode_coefficients(hand);
  CHECK(dec.records == 1);
  CHECK(dec.N == 2);
  CHECK(dec.matrix == std::vector<std::uint8_t>{7, 9});

  hand[0] = 'X';
  CHECK_THROWS_AS(decode_coefficients(hand), ValidationError);
}

TEST_CASE("CSV import") {
  TempDir tmp;
  const auto csv = tmp.path / "in.csv";
  const auto fmt = [](double x) {
    std::ostringstream s;
    s.precision(17);
    s << x;
    return s.str();
  };
  const double R5 = quadclass::invariants::regulator(5);
  const double R10 = quadclass::invariants::regulator(10);
  const double R229 = quadclass::invariants::regulator(229);

  SUBCASE("well-formed rows") {
    write_all(csv, "d,D,h,R\n10,40,2," + fmt(R10) + "\n5,5,1," + fmt(R5) + "\n229,229,3," + fmt(R229) + "\n");
    ImportOptions opt;
    opt.coeff_bound = 50;
    const auto ds = import_csv(csv, opt);
    CHECK(ds.size() == 3);
    CHECK(ds.provenance() == Provenance::imported);
    CHECK(ds.record(0).d == 5);
    CHECK(ds.record(2).h == 3);
    const auto ref = testing::dataset_of({5, 10, 229}, 50);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(ds.record(i) == ref.record(i));
      CHECK(std::equal(ds.coefficients(i).begin(), ds.coefficients(i).end(), ref.coefficients(i).begin()));
    }
    opt.classes = {1, 3};
    CHECK(import_csv(csv, opt).size() == 2);
  }
  SUBCASE("header only") {
    write_all(csv, "d,D,h,R\n");
    CHECK(import_csv(csv).empty());
  }
  SUBCASE("inconsistent coefficient") {
    write_all(csv, "d,D,h,R,a1,a2\n5,5,1," + fmt(R5) + ",1,2\n");
    try {
      import_csv(csv);
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("line 2") != std::string::npos);
      CHECK(msg.find("a2") != std::string::npos);
    }
  }
  SUBCASE("wrong class number") {
    write_all(csv, "d,D,h,R\n5,5,1," + fmt(R5) + "\n10,40,1," + fmt(R10) + "\n");
    try {
      import_csv(csv);
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("line 3") != std::string::npos);
      CHECK(msg.find("field h") != std::string::npos);
    }
    ImportOptions trust;
    trust.verify_class_numbers = false;
    CHECK(import_csv(csv, trust).record(1).h == 1);
  }
  SUBCASE("wrong discriminant and regulator") {
    write_all(csv, "d,D,h,R\n10,10,2," + fmt(R10) + "\n");
    CHECK_THROWS_AS(import_csv(csv), ValidationError);
    write_all(csv, "d,D,h,R\n10,40,2,1.9\n");
    CHECK_THROWS_AS(import_csv(csv), ValidationError);
  }
  SUBCASE("malformed rows") {
    write_all(csv, "d,D,h,R\n5,5,1\n");
    try {
      import_csv(csv);
      FAIL("expected an error");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    write_all(csv, "d,D,h,R\nfive,5,1,0.48\n");
    CHECK_THROWS_AS(import_csv(csv), FormatError);
    write_all(csv, "d,h,R\n5,1,0.48\n");
    CHECK_THROWS_AS(import_csv(csv), FormatError);
  }
  SUBCASE("duplicates") {
    write_all(csv, "d,D,h,R\n5,5,1," + fmt(R5) + "\n5,5,1," + fmt(R5) + "\n");
    CHECK_THROWS_AS(import_csv(csv), ValidationError);
  }
}

TEST_CASE("balanced class 1 / class 3 sample") {
  GenerateOptions opt;
  opt.max_D = 250'000;
  opt.classes = {1, 3};
  opt.coeff_bound = 20;
  const auto full = generate(opt);
  const auto a = balanced_sample_13(full, 11);
  const auto b = balanced_sample_13(full, 11);
  const auto c = balanced_sample_13(full, 12);
  CHECK(a == b);
  CHECK(fields_csv(a) == fields_csv(b));
  CHECK_FALSE(a == c);

  std::map<Int, std::map<Int, std::size_t>> per_bucket;
  for (const auto& r : a.records()) ++per_bucket[(r.D - 1) / 100'000][r.h];
  std::size_t threes = 0;
  for (const auto& r : full.records()) threes += r.h == 3 ? 1 : 0;
  CHECK(a.size() == 2 * threes);
  CHECK(per_bucket[0][3] == 1261);
  for (auto& [bucket, counts] : per_bucket) CHECK(counts[1] == counts[3]);
}

TEST_CASE("stratified split") {
  const auto& ds = small_123();
  const auto hundred = ds.subset([] {
    std::vector<std::size_t> v;
    for (std::size_t i = 0; i < 100; ++i) v.push_back(i * 7);
    return v;
  }(), "hundred");
  auto [train, test] = split(hundred, 0.7, 5);
  CHECK(train.size() == 70);
  CHECK(test.size() == 30);
  auto [train2, test2] = split(hundred, 0.7, 5);
  CHECK(train == train2);
  CHECK(test == test2);

  auto [tr, te] = split(ds, 0.4, 9);
  CHECK(tr.size() + te.size() == ds.size());
  std::map<Int, double> parent, part;
  for (const auto& r : ds.records()) parent[r.h] += 1.0 / static_cast<double>(ds.size());
  for (const auto& r : tr.records()) part[r.h] += 1.0 / static_cast<double>(tr.size());
  for (const auto& [h, frac] : parent) CHECK(std::abs(part[h] - frac) < 0.01);

  std::set<Int> seen;
  for (const auto& r : tr.records()) seen.insert(r.d);
  for (const auto& r : te.records()) CHECK(seen.insert(r.d).second);

  CHECK_THROWS_AS(split(ds, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(split(ds, 0.0, 1), std::invalid_argument);
}
