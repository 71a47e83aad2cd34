#include "surfcp/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace surfcp {

namespace {

constexpr char kMagic[4] = {'F', 'T', 'S', '2'};

class ByteWriter {
 public:
  void raw(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  void u8(std::uint8_t x) { out_.push_back(x); }
  void u16(std::uint16_t x) { uint(x, 2); }
  void u32(std::uint32_t x) { uint(x, 4); }
  void f64(double x) { uint(std::bit_cast<std::uint64_t>(x), 8); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void uint(std::uint64_t x, int bytes) {
    for (int b = 0; b < bytes; ++b) out_.push_back(static_cast<std::uint8_t>((x >> (8 * b)) & 0xffu));
  }
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(uint(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(uint(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
  double f64() { return std::bit_cast<double>(uint(8)); }
  void expect(const char* p, std::size_t n) {
    need(n);
    if (!std::equal(p, p + n, in_.begin() + static_cast<std::ptrdiff_t>(pos_),
                    [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; })) {
      fail(ErrorKind::data, "cli", "read_dataset", "bad magic: not an FTS2 dataset");
    }
    pos_ += n;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) fail(ErrorKind::data, "cli", "read_dataset", "truncated dataset payload");
  }
  std::uint64_t uint(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t x = 0;
    for (int b = 0; b < bytes; ++b) x |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * b);
    return x;
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint32_t to_u32(Index x, const char* what) {
  if (x < 0 || x > static_cast<Index>(std::numeric_limits<std::uint32_t>::max())) {
    fail(ErrorKind::argument, "cli", "write_dataset", std::string(what) + " does not fit in 32 bits");
  }
  return static_cast<std::uint32_t>(x);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = trim(text.substr(start, nl - start));
    if (!line.empty()) out.push_back(line);
    start = nl + 1;
  }
  return out;
}

bool parse_index(std::string_view s, Index& out) {
  long long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return false;
  out = static_cast<Index>(v);
  return true;
}

Index require_index(std::string_view s, const char* op, std::size_t line) {
  Index v = 0;
  if (!parse_index(s, v) || v < 0) {
    fail(ErrorKind::data, "cli", op,
         "line " + std::to_string(line) + ": '" + std::string(s) + "' is not a non-negative integer");
  }
  return v;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += (c == '\n' || c == '\r') ? ' ' : c;
  }
  return out + "\"";
}

}  // namespace

std::vector<std::uint8_t> encode_dataset(const FtsDataset& ds) {
  ds.validate();
  const Index n1 = ds.domain.n1();
  const Index n2 = ds.domain.n2();
  ByteWriter w;
  w.raw(kMagic, 4);
  w.u16(kDatasetVersion);
  w.u32(to_u32(n1, "N1"));
  w.u32(to_u32(n2, "N2"));
  w.u32(to_u32(ds.length(), "T"));
  w.u8(ds.mask ? 1 : 0);
  if (ds.mask) {
    for (Index i = 0; i < n1; ++i)
      for (Index j = 0; j < n2; ++j) w.u8((*ds.mask)(i, j) ? 1 : 0);
  }
  for (Index i = 0; i < n1; ++i) w.f64(ds.domain.u()[i]);
  for (Index j = 0; j < n2; ++j) w.f64(ds.domain.v()[j]);
  for (const Surface& f : ds.frames)
    for (Index k = 0; k < f.size(); ++k) w.f64(f.data()[k]);
  return w.take();
}

FtsDataset decode_dataset(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect(kMagic, 4);
  const std::uint16_t version = r.u16();
  if (version != kDatasetVersion) {
    fail(ErrorKind::data, "cli", "read_dataset", "unsupported dataset version " + std::to_string(version));
  }
  const Index n1 = r.u32();
  const Index n2 = r.u32();
  const Index t = r.u32();
  const std::uint8_t flags = r.u8();
  if ((flags & ~std::uint8_t{1}) != 0) fail(ErrorKind::data, "cli", "read_dataset", "unknown flag bits set");
  const bool has_mask = (flags & 1u) != 0;
  const auto cells = static_cast<std::size_t>(n1) * static_cast<std::size_t>(n2);
  const std::size_t expected = (has_mask ? cells : 0) + 8 * (static_cast<std::size_t>(n1 + n2)) +
                               8 * cells * static_cast<std::size_t>(t);
  if (r.remaining() != expected) {
    fail(ErrorKind::data, "cli", "read_dataset",
         "payload has " + std::to_string(r.remaining()) + " bytes, header declares " + std::to_string(expected));
  }
  std::optional<Mask> mask;
  if (has_mask) {
    MaskArray inside(n1, n2);
    for (Index i = 0; i < n1; ++i) {
      for (Index j = 0; j < n2; ++j) {
        const std::uint8_t b = r.u8();
        if (b > 1) fail(ErrorKind::data, "cli", "read_dataset", "mask byte is not 0 or 1");
        inside(i, j) = b == 1;
      }
    }
    if (!inside.any()) fail(ErrorKind::data, "cli", "read_dataset", "mask has no inside cells");
    mask.emplace(std::move(inside));
  }
  Eigen::VectorXd u(n1);
  Eigen::VectorXd v(n2);
  for (Index i = 0; i < n1; ++i) u[i] = r.f64();
  for (Index j = 0; j < n2; ++j) v[j] = r.f64();
  std::vector<Surface> frames(static_cast<std::size_t>(t), Surface(n1, n2));
  for (Surface& f : frames)
    for (Index k = 0; k < f.size(); ++k) f.data()[k] = r.f64();
  try {
    FtsDataset ds(GridDomain(std::move(u), std::move(v)), std::move(frames), std::move(mask));
    ds.validate();
    return ds;
  } catch (const Error& e) {
    fail(ErrorKind::data, "cli", "read_dataset", e.what());
  }
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cli", "read_file", "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cli", "write_file", "cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::io, "cli", "write_file", "write to '" + path + "' failed");
}

std::string read_text_file(const std::string& path) {
  const std::vector<std::uint8_t> b = read_file_bytes(path);
  return {b.begin(), b.end()};
}

void write_text_file(const std::string& path, std::string_view text) {
  write_file_bytes(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

void write_dataset(const std::string& path, const FtsDataset& ds) { write_file_bytes(path, encode_dataset(ds)); }

FtsDataset read_dataset(const std::string& path) { return decode_dataset(read_file_bytes(path)); }

std::string format_double(double x) {
  if (std::isnan(x)) return "NA";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, res.ptr};
}

double parse_double(std::string_view text) {
  const std::string_view s = trim(text);
  if (s == "NA" || s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  const auto [p, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    fail(ErrorKind::data, "cli", "parse_double", "'" + std::string(s) + "' is not a number");
  }
  return v;
}

FtsDataset parse_csv(std::string_view values, std::optional<std::string_view> mask_text) {
  struct Cell {
    Index t, i, j;
    double value;
  };
  const auto lines = split_lines(values);
  std::vector<Cell> cells;
  cells.reserve(lines.size());
  Index nt = 0, n1 = 0, n2 = 0;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const auto f = split_fields(lines[ln]);
    Index probe = 0;
    if (ln == 0 && !f.empty() && !parse_index(f[0], probe)) continue;  // header
    if (f.size() != 4) {
      fail(ErrorKind::data, "cli", "import_csv", "line " + std::to_string(ln + 1) + ": expected t,i,j,value");
    }
    Cell c{require_index(f[0], "import_csv", ln + 1), require_index(f[1], "import_csv", ln + 1),
           require_index(f[2], "import_csv", ln + 1), parse_double(f[3])};
    if (!std::isfinite(c.value)) {
      fail(ErrorKind::data, "cli", "import_csv", "line " + std::to_string(ln + 1) + ": non-finite value");
    }
    nt = std::max(nt, c.t + 1);
    n1 = std::max(n1, c.i + 1);
    n2 = std::max(n2, c.j + 1);
    cells.push_back(c);
  }
  if (cells.empty()) fail(ErrorKind::data, "cli", "import_csv", "no data rows");
  const double declared = static_cast<double>(nt) * static_cast<double>(n1) * static_cast<double>(n2);
  if (declared > static_cast<double>(cells.size())) {
    fail(ErrorKind::data, "cli", "import_csv",
         "missing cells: " + std::to_string(cells.size()) + " rows for a " + std::to_string(nt) + " x " +
             std::to_string(n1) + " x " + std::to_string(n2) + " grid");
  }
  std::vector<Surface> frames(static_cast<std::size_t>(nt), Surface::Zero(n1, n2));
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(nt * n1 * n2), 0);
  for (const Cell& c : cells) {
    auto& flag = seen[static_cast<std::size_t>((c.t * n1 + c.i) * n2 + c.j)];
    if (flag) {
      fail(ErrorKind::data, "cli", "import_csv",
           "duplicate cell (t=" + std::to_string(c.t) + ", i=" + std::to_string(c.i) + ", j=" + std::to_string(c.j) + ")");
    }
    flag = 1;
    frames[static_cast<std::size_t>(c.t)](c.i, c.j) = c.value;
  }

  std::optional<Mask> mask;
  if (mask_text) {
    MaskArray inside = MaskArray::Constant(n1, n2, false);
    std::vector<std::uint8_t> mseen(static_cast<std::size_t>(n1 * n2), 0);
    const auto mlines = split_lines(*mask_text);
    for (std::size_t ln = 0; ln < mlines.size(); ++ln) {
      const auto f = split_fields(mlines[ln]);
      Index probe = 0;
      if (ln == 0 && !f.empty() && !parse_index(f[0], probe)) continue;
      if (f.size() != 3) {
        fail(ErrorKind::data, "cli", "import_csv", "mask line " + std::to_string(ln + 1) + ": expected i,j,inside");
      }
      const Index i = require_index(f[0], "import_csv", ln + 1);
      const Index j = require_index(f[1], "import_csv", ln + 1);
      const Index in = require_index(f[2], "import_csv", ln + 1);
      if (i >= n1 || j >= n2) fail(ErrorKind::dimension, "cli", "import_csv", "mask cell outside the value grid");
      if (in > 1) fail(ErrorKind::data, "cli", "import_csv", "mask flag must be 0 or 1");
      auto& flag = mseen[static_cast<std::size_t>(i * n2 + j)];
      if (flag) fail(ErrorKind::data, "cli", "import_csv", "duplicate mask cell");
      flag = 1;
      inside(i, j) = in == 1;
    }
    if (std::find(mseen.begin(), mseen.end(), 0) != mseen.end()) {
      fail(ErrorKind::data, "cli", "import_csv", "mask does not cover every grid cell");
    }
    if (!inside.any()) fail(ErrorKind::data, "cli", "import_csv", "mask has no inside cells");
    mask.emplace(std::move(inside));
  }
  return FtsDataset(GridDomain::unit(n1, n2), std::move(frames), std::move(mask));
}

std::string format_values_csv(const FtsDataset& ds) {
  std::string out = "t,i,j,value\n";
  for (Index t = 0; t < ds.length(); ++t) {
    const Surface& f = ds.frames[static_cast<std::size_t>(t)];
    for (Index i = 0; i < f.rows(); ++i) {
      for (Index j = 0; j < f.cols(); ++j) {
        out += std::to_string(t) + ',' + std::to_string(i) + ',' + std::to_string(j) + ',' + format_double(f(i, j)) + '\n';
      }
    }
  }
  return out;
}

std::string format_mask_csv(const Mask& mask) {
  std::string out = "i,j,inside\n";
  for (Index i = 0; i < mask.rows(); ++i)
    for (Index j = 0; j < mask.cols(); ++j)
      out += std::to_string(i) + ',' + std::to_string(j) + ',' + (mask(i, j) ? "1" : "0") + '\n';
  return out;
}

FtsDataset import_csv(const std::string& values_path, const std::optional<std::string>& mask_path) {
  const std::string values = read_text_file(values_path);
  if (mask_path) {
    const std::string mask = read_text_file(*mask_path);
    return parse_csv(values, std::string_view(mask));
  }
  return parse_csv(values);
}

void export_csv(const FtsDataset& ds, const std::string& values_path, const std::optional<std::string>& mask_path) {
  write_text_file(values_path, format_values_csv(ds));
  if (mask_path) {
    if (!ds.mask) fail(ErrorKind::argument, "cli", "export_csv", "dataset has no mask to export");
    write_text_file(*mask_path, format_mask_csv(*ds.mask));
  }
}

std::string kernel_to_json(const TrueKernel& kernel) {
  nlohmann::json j;
  auto basis = [](const BasisSystem1D& b) { return nlohmann::json{{"kind", to_string(b.kind())}, {"size", b.size()}}; };
  j["basis_u"] = basis(kernel.basis.basis_u());
  j["basis_v"] = basis(kernel.basis.basis_v());
  nlohmann::json rows = nlohmann::json::array();
  for (Index r = 0; r < kernel.coefficient_operator.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Index c = 0; c < kernel.coefficient_operator.cols(); ++c) row.push_back(kernel.coefficient_operator(r, c));
    rows.push_back(std::move(row));
  }
  j["operator"] = std::move(rows);
  return j.dump(1) + "\n";
}

TrueKernel kernel_from_json(std::string_view text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    auto basis = [](const nlohmann::json& b) {
      return BasisSystem1D(parse_basis_kind(b.at("kind").get<std::string>()), b.at("size").get<Index>());
    };
    TensorBasis tb(basis(j.at("basis_u")), basis(j.at("basis_v")));
    const auto& rows = j.at("operator");
    const Index k = tb.size();
    if (static_cast<Index>(rows.size()) != k) {
      fail(ErrorKind::dimension, "cli", "read_kernel", "operator row count differs from the basis size");
    }
    Eigen::MatrixXd a(k, k);
    for (Index r = 0; r < k; ++r) {
      const auto& row = rows.at(static_cast<std::size_t>(r));
      if (static_cast<Index>(row.size()) != k) {
        fail(ErrorKind::dimension, "cli", "read_kernel", "operator row length differs from the basis size");
      }
      for (Index c = 0; c < k; ++c) a(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    return TrueKernel{std::move(tb), std::move(a)};
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::data, "cli", "read_kernel", std::string("malformed kernel JSON: ") + e.what());
  }
}

std::string format_study_csv(const std::vector<StudyRecord>& records) {
  std::string out(kStudyHeader);
  out += '\n';
  for (const StudyRecord& r : records) {
    out += to_string(r.method);
    out += ',' + std::to_string(r.length) + ',' + std::to_string(r.block_size) + ',' + std::to_string(r.rep) + ',';
    out += r.failed ? "NA" : (r.covered ? "1" : "0");
    out += ',' + (r.failed ? std::string("NA") : format_double(r.band_size));
    out += ',' + std::to_string(r.seed) + '\n';
  }
  return out;
}

std::string format_aggregate_csv(const std::vector<StudyAggregate>& aggregates) {
  std::string out(kAggregateHeader);
  out += '\n';
  for (const StudyAggregate& a : aggregates) {
    out += to_string(a.method);
    out += ',' + std::to_string(a.length) + ',' + std::to_string(a.block_size) + ',' + std::to_string(a.n_reps) + ',' +
           std::to_string(a.n_failed) + ',' + format_double(a.coverage) + ',' + format_double(a.ci.lower) + ',' +
           format_double(a.ci.upper) + ',' + format_double(a.mean_size) + ',' + format_double(a.median_size) + '\n';
  }
  return out;
}

std::vector<StudyRecord> parse_study_csv(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines[0] != kStudyHeader) fail(ErrorKind::data, "cli", "parse_study_csv", "unexpected header");
  std::vector<StudyRecord> out;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const auto f = split_fields(lines[ln]);
    if (f.size() != 7) fail(ErrorKind::data, "cli", "parse_study_csv", "line " + std::to_string(ln + 1) + ": 7 fields expected");
    StudyRecord r;
    r.method = parse_far_method(std::string(f[0]));
    r.length = require_index(f[1], "parse_study_csv", ln + 1);
    r.block_size = require_index(f[2], "parse_study_csv", ln + 1);
    r.rep = require_index(f[3], "parse_study_csv", ln + 1);
    r.failed = f[4] == "NA";
    r.covered = f[4] == "1";
    r.band_size = parse_double(f[5]);
    std::uint64_t seed = 0;
    const auto [p, ec] = std::from_chars(f[6].data(), f[6].data() + f[6].size(), seed);
    if (ec != std::errc() || p != f[6].data() + f[6].size()) {
      fail(ErrorKind::data, "cli", "parse_study_csv", "bad seed on line " + std::to_string(ln + 1));
    }
    r.seed = seed;
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_rolling_csv(const RollingReport& report) {
  std::string out(kRollingHeader);
  out += '\n';
  for (const RollingShift& s : report.shifts) {
    out += std::to_string(s.shift) + ',';
    if (s.failed) {
      out += "NA,NA,NA,NA," + std::to_string(s.seed) + ",failed," + csv_quote(s.error) + '\n';
    } else {
      out += std::string(s.covered ? "1" : "0") + ',' + (s.covered_differenced ? "1" : "0") + ',' +
             format_double(s.band_size) + ',' + format_double(s.radius) + ',' + std::to_string(s.seed) + ",ok,\n";
    }
  }
  return out;
}

FtsDataset surface_dataset(const Surface& s, const GridDomain& d, const std::optional<Mask>& mask) {
  return FtsDataset(d, {s}, mask);
}

BandFiles band_file_names(const std::string& prefix) {
  return {prefix + "_center.fts", prefix + "_lower.fts", prefix + "_upper.fts", prefix + "_band.txt"};
}

}  // namespace surfcp
