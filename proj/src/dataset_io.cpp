#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string_view>

#include <json.hpp>

#include "quadclass/checksum.hpp"
#include "quadclass/dataset.hpp"
#include "quadclass/error.hpp"
#include "quadclass/invariants.hpp"
#include "quadclass/parallel.hpp"

namespace quadclass::data {

namespace {

constexpr std::string_view kFieldsHeader = "d,D,h,h_plus,R,n_d,p1,p2,p3,S_zeta,S_chi,unit_norm";
constexpr std::string_view kDescriptorFormat = "quadclass-dataset";
constexpr int kDescriptorVersion = 1;
constexpr std::uint8_t kMagic[4] = {'Q', 'C', 'F', '1'};

// Shortest representation that parses back to the same double.
void append_real(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_row(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    out.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return out;
}

bool blank(std::string_view line) { return trim(line).empty(); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(std::span<const std::uint8_t> bytes, std::size_t offset, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes[offset + i]) << (8 * i);
  return v;
}

std::uint64_t fnv(std::string_view text) {
  Fnv1a64 h;
  h.update(text);
  return h.digest();
}

std::uint64_t fnv(std::span<const std::uint8_t> bytes) {
  Fnv1a64 h;
  h.update(bytes);
  return h.digest();
}

std::string line_prefix(std::size_t line) { return "line " + std::to_string(line) + ": "; }

std::vector<FieldRecord> parse_fields(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || trim(lines[0]) != kFieldsHeader)
    throw FormatError("fields.csv: expected header '" + std::string(kFieldsHeader) + "'");
  std::vector<FieldRecord> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (blank(lines[i])) continue;
    const auto cells = split_row(lines[i]);
    if (cells.size() != 12) throw FormatError(line_prefix(i + 1) + "expected 12 columns");
    auto integer = [&](std::size_t c) {
      auto v = parse_number<Int>(cells[c]);
      if (!v) throw FormatError(line_prefix(i + 1) + "bad integer '" + std::string(cells[c]) + "'");
      return *v;
    };
    auto real = [&](std::size_t c) {
      auto v = parse_number<double>(cells[c]);
      if (!v) throw FormatError(line_prefix(i + 1) + "bad real '" + std::string(cells[c]) + "'");
      return *v;
    };
    FieldRecord r;
    r.d = integer(0);
    r.D = integer(1);
    r.h = integer(2);
    r.h_plus = integer(3);
    r.R = real(4);
    r.n_d = static_cast<int>(integer(5));
    r.p = {integer(6), integer(7), integer(8)};
    r.S_zeta = real(9);
    r.S_chi = real(10);
    r.unit_norm = static_cast<int>(integer(11));
    out.push_back(r);
  }
  return out;
}

}  // namespace

std::string fields_csv(const Dataset& ds) {
  std::string out(kFieldsHeader);
  out += '\n';
  for (const auto& r : ds.records()) {
    out += std::to_string(r.d) + ',' + std::to_string(r.D) + ',' + std::to_string(r.h) + ',' +
           std::to_string(r.h_plus) + ',';
    append_real(out, r.R);
    out += ',' + std::to_string(r.n_d);
    for (auto p : r.p) out += ',' + std::to_string(p);
    out += ',';
    append_real(out, r.S_zeta);
    out += ',';
    append_real(out, r.S_chi);
    out += ',' + std::to_string(r.unit_norm) + '\n';
  }
  return out;
}

std::vector<std::uint8_t> encode_coefficients(std::span<const std::uint8_t> matrix, std::uint32_t records,
                                              std::uint32_t N) {
  if (matrix.size() != static_cast<std::size_t>(records) * N)
    throw std::invalid_argument("encode_coefficients: matrix size does not match records x N");
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.reserve(12 + matrix.size() + 8);
  put_u32(out, records);
  put_u32(out, N);
  out.insert(out.end(), matrix.begin(), matrix.end());
  put_u64(out, fnv(out));
  return out;
}

DecodedCoefficients decode_coefficients(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || bytes[0] != 'Q' || bytes[1] != 'C' || bytes[2] != 'F')
    throw ValidationError("coefficient file: bad magic");
  if (bytes[3] != '1')
    throw ValidationError(std::string("coefficient file: version mismatch (found QCF") +
                          static_cast<char>(bytes[3]) + ", expected QCF1)");
  if (bytes.size() < 20) throw ValidationError("coefficient file: truncated header");
  DecodedCoefficients out;
  out.records = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
  out.N = static_cast<std::uint32_t>(get_le(bytes, 8, 4));
  const std::size_t payload = static_cast<std::size_t>(out.records) * out.N;
  if (bytes.size() != 12 + payload + 8)
    throw ValidationError("coefficient file: checksum failure (expected " + std::to_string(12 + payload + 8) +
                          " bytes, found " + std::to_string(bytes.size()) + ")");
  const auto stored = get_le(bytes, 12 + payload, 8);
  if (stored != fnv(bytes.first(12 + payload)))
    throw ValidationError("coefficient file: checksum failure");
  out.matrix.assign(bytes.begin() + 12, bytes.begin() + 12 + static_cast<std::ptrdiff_t>(payload));
  return out;
}

std::uint64_t Dataset::checksum() const {
  Fnv1a64 h;
  h.update(fields_csv(*this));
  h.update(encode_coefficients(coefficients_, static_cast<std::uint32_t>(records_.size()),
                               static_cast<std::uint32_t>(coeff_bound_)));
  return h.digest();
}

void save(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto fields = fields_csv(ds);
  const auto coeffs = encode_coefficients(ds.coefficient_matrix(), static_cast<std::uint32_t>(ds.size()),
                                          static_cast<std::uint32_t>(ds.coeff_bound()));
  nlohmann::ordered_json desc;
  desc["format"] = kDescriptorFormat;
  desc["version"] = kDescriptorVersion;
  desc["provenance"] = to_string(ds.provenance());
  desc["source"] = ds.source();
  desc["records"] = ds.size();
  desc["coeff_bound"] = ds.coeff_bound();
  desc["fields_fnv1a"] = to_hex(fnv(fields));
  desc["coefficients_fnv1a"] = to_hex(fnv(coeffs));
  desc["checksum"] = to_hex(ds.checksum());

  write_file(dir / "fields.csv", fields);
  write_file(dir / "coefficients.qcf",
             std::string_view(reinterpret_cast<const char*>(coeffs.data()), coeffs.size()));
  write_file(dir / "dataset.json", desc.dump(2) + "\n");
}

Dataset load(const std::filesystem::path& dir) {
  nlohmann::json desc;
  try {
    desc = nlohmann::json::parse(read_file(dir / "dataset.json"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("dataset.json: " + std::string(e.what()));
  }
  if (desc.value("format", "") != kDescriptorFormat) throw FormatError("dataset.json: not a quadclass dataset");
  if (desc.value("version", -1) != kDescriptorVersion)
    throw ValidationError("dataset.json: version mismatch (found " + desc["version"].dump() + ", expected " +
                          std::to_string(kDescriptorVersion) + ")");

  const auto fields = read_file(dir / "fields.csv");
  if (to_hex(fnv(fields)) != desc.value("fields_fnv1a", ""))
    throw ValidationError("fields.csv: checksum failure");
  const auto raw = read_file(dir / "coefficients.qcf");
  const auto decoded =
      decode_coefficients(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()));

  auto records = parse_fields(fields);
  if (records.size() != decoded.records || records.size() != desc.value("records", std::size_t{0}))
    throw ValidationError("dataset: record counts disagree between fields.csv, coefficients.qcf and dataset.json");
  if (decoded.N != desc.value("coeff_bound", std::size_t{0}))
    throw ValidationError("dataset: coefficient bound disagrees with dataset.json");

  try {
    return Dataset(std::move(records), decoded.matrix, decoded.N,
                   provenance_from_string(desc.value("provenance", "")), desc.value("source", ""));
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
}

namespace {

struct ImportRow {
  std::size_t line = 0;
  std::map<std::string, std::string_view> cells;
  Int d = 0;
  Int h = 0;
};

struct ImportResult {
  FieldRecord record;
  std::vector<std::uint8_t> coefficients;
  std::string error;
};

}  // namespace

Dataset import_csv(const std::filesystem::path& path, const ImportOptions& options) {
  const std::string text = read_file(path);
  const auto lines = split_lines(text);
  std::size_t header_index = 0;
  while (header_index < lines.size() && blank(lines[header_index])) ++header_index;
  if (header_index == lines.size()) throw FormatError(path.string() + ": missing header row");

  const auto header_cells = split_row(lines[header_index]);
  std::vector<std::string> header(header_cells.begin(), header_cells.end());
  for (const char* required : {"d", "D", "h", "R"}) {
    if (std::find(header.begin(), header.end(), required) == header.end())
      throw FormatError(path.string() + ": missing required column '" + required + "'");
  }
  // a<n> columns for n within the coefficient bound.
  std::vector<std::pair<std::string, std::size_t>> coeff_columns;
  for (const auto& name : header) {
    if (name.size() < 2 || name[0] != 'a') continue;
    if (auto n = parse_number<std::size_t>(std::string_view(name).substr(1)); n && *n >= 1 && *n <= options.coeff_bound)
      coeff_columns.emplace_back(name, *n);
  }

  std::vector<ImportRow> rows;
  for (std::size_t i = header_index + 1; i < lines.size(); ++i) {
    if (blank(lines[i])) continue;
    const auto cells = split_row(lines[i]);
    const std::size_t line = i + 1;
    if (cells.size() != header.size())
      throw FormatError(line_prefix(line) + "expected " + std::to_string(header.size()) + " columns, found " +
                        std::to_string(cells.size()));
    ImportRow row;
    row.line = line;
    for (std::size_t c = 0; c < header.size(); ++c) row.cells[header[c]] = cells[c];
    auto d = parse_number<Int>(row.cells["d"]);
    auto h = parse_number<Int>(row.cells["h"]);
    if (!d) throw FormatError(line_prefix(line) + "bad integer in column d");
    if (!h) throw FormatError(line_prefix(line) + "bad integer in column h");
    row.d = *d;
    row.h = *h;
    if (!options.classes.empty() && !options.classes.contains(row.h)) continue;
    rows.push_back(std::move(row));
  }

  Int max_D = 16;
  for (const auto& row : rows) max_D = std::max(max_D, row.d % 4 == 1 ? row.d : 4 * row.d);
  const auto factor_table = std::make_shared<const arith::SmallestFactorTable>(
      static_cast<std::uint32_t>(std::min<Int>(max_D / 4, Int{1} << 24)));
  const arith::CoefficientSieve sieve(options.coeff_bound);
  const std::size_t N = options.coeff_bound;

  constexpr std::size_t kChunk = 256;
  std::vector<ImportResult> results(rows.size());
  parallel_for((rows.size() + kChunk - 1) / kChunk, resolve_threads(options.threads), [&](std::size_t chunk) {
    invariants::ReducedFormCycles cycles(factor_table);
    std::vector<std::int8_t> chi(N);
    const std::size_t end = std::min(rows.size(), (chunk + 1) * kChunk);
    for (std::size_t k = chunk * kChunk; k < end; ++k) {
      const auto& row = rows[k];
      auto& res = results[k];
      const auto prefix = line_prefix(row.line);
      auto fail = [&](const std::string& field, const std::string& why) {
        res.error = prefix + "field " + field + ": " + why;
      };
      auto cell = [&](const std::string& name) -> std::optional<std::string_view> {
        const auto it = row.cells.find(name);
        if (it == row.cells.end() || it->second.empty()) return std::nullopt;
        return it->second;
      };

      if (row.d <= 1 || !arith::is_squarefree(static_cast<std::uint64_t>(row.d))) {
        fail("d", "must be a square-free integer > 1");
        continue;
      }
      const Int D = arith::discriminant(row.d).D;
      const auto supplied_D = cell("D") ? parse_number<Int>(*cell("D")) : std::nullopt;
      if (!supplied_D || *supplied_D != D) {
        fail("D", "expected " + std::to_string(D));
        continue;
      }
      const auto supplied_R = cell("R") ? parse_number<double>(*cell("R")) : std::nullopt;
      if (!supplied_R) {
        fail("R", "missing or not a number");
        continue;
      }

      const auto cf = invariants::omega_expansion(row.d);
      const int norm = cf.period.size() % 2 == 1 ? -1 : 1;
      Int h = row.h;
      Int h_plus = norm == -1 ? h : 2 * h;
      if (options.verify_class_numbers) {
        h_plus = cycles.narrow_class_number(D);
        const Int computed_h = norm == -1 ? h_plus : h_plus / 2;
        if (computed_h != row.h) {
          fail("h", "expected " + std::to_string(computed_h) + ", found " + std::to_string(row.h));
          continue;
        }
      }
      const double R = invariants::log_unit(invariants::fundamental_unit(row.d, cf), row.d);
      if (std::abs(*supplied_R - R) > options.regulator_tolerance * R) {
        fail("R", "expected " + std::to_string(R) + " within relative " + std::to_string(options.regulator_tolerance));
        continue;
      }

      res.coefficients.resize(N);
      sieve.fill(D, chi, res.coefficients);
      double S_zeta = 0.0;
      double S_chi = 0.0;
      for (std::size_t n = 1; n <= N; ++n) {
        S_zeta += static_cast<double>(res.coefficients[n - 1]) / static_cast<double>(n);
        S_chi += static_cast<double>(chi[n - 1]) / static_cast<double>(n);
      }
      try {
        res.record = make_record(row.d, h, h_plus, R, norm, S_zeta, S_chi);
      } catch (const Error& e) {
        fail("n_d", e.what());
        continue;
      }
      const auto& r = res.record;

      auto check_int = [&](const char* name, Int expected) {
        const auto c = cell(name);
        if (!c) return true;
        const auto v = parse_number<Int>(*c);
        if (v && *v == expected) return true;
        fail(name, "expected " + std::to_string(expected) + ", found '" + std::string(*c) + "'");
        return false;
      };
      auto check_real = [&](const char* name, double expected) {
        const auto c = cell(name);
        if (!c) return true;
        const auto v = parse_number<double>(*c);
        if (v && std::abs(*v - expected) <= 1e-9 * std::max(1.0, std::abs(expected))) return true;
        fail(name, "expected " + std::to_string(expected) + ", found '" + std::string(*c) + "'");
        return false;
      };
      if (!check_int("h_plus", r.h_plus) || !check_int("unit_norm", r.unit_norm) || !check_int("n_d", r.n_d) ||
          !check_int("p1", r.p[0]) || !check_int("p2", r.p[1]) || !check_int("p3", r.p[2]) ||
          !check_real("S_zeta", r.S_zeta) || !check_real("S_chi", r.S_chi))
        continue;
      for (const auto& [name, n] : coeff_columns) {
        if (!check_int(name.c_str(), res.coefficients[n - 1])) break;
      }
    }
  });

  for (const auto& res : results) {
    if (!res.error.empty()) throw ValidationError(res.error);
  }

  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return rows[a].d < rows[b].d; });
  std::vector<FieldRecord> records;
  std::vector<std::uint8_t> coefficients;
  records.reserve(rows.size());
  coefficients.reserve(rows.size() * N);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto i = order[k];
    if (k > 0 && rows[order[k - 1]].d == rows[i].d)
      throw ValidationError(line_prefix(rows[i].line) + "field d: duplicate d = " + std::to_string(rows[i].d));
    records.push_back(results[i].record);
    coefficients.insert(coefficients.end(), results[i].coefficients.begin(), results[i].coefficients.end());
  }
  return Dataset(std::move(records), std::move(coefficients), N, Provenance::imported, path.string());
}

}  // namespace quadclass::data
