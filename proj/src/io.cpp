#include "cpfos/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

namespace cpfos::io {

namespace {

static_assert(std::numeric_limits<double>::is_iec559, "float64 payloads need IEEE-754 doubles");

// ---- little-endian primitives ----

template <typename U>
U load_le(const char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    v |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

template <typename U>
void store_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename U>
U load_endian(const char* p, bool swap) {
  U v = load_le<U>(p);
  if (swap) {
    U r = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) r |= ((v >> (8 * i)) & 0xFF) << (8 * (sizeof(U) - 1 - i));
    v = r;
  }
  return v;
}

// ---- text helpers ----

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    if (end == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    std::string_view cell = trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"') cell = cell.substr(1, cell.size() - 2);
    cells.emplace_back(cell);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

template <typename I>
I parse_integer(std::string_view s, const std::string& what) {
  I v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw InvalidData(what + ": expected an integer, got '" + std::string(s) + "'");
  return v;
}

double parse_real(std::string_view s, const std::string& what) {
  double v = 0;
  if (!parse_double(s, v)) throw InvalidData(what + ": expected a finite number, got '" + std::string(s) + "'");
  return v;
}

const std::string& require_key(const KeyValues& kv, const std::string& key, const fs::path& source) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw InvalidData(source.string() + ": missing key '" + key + "'");
  return it->second;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split_names(std::string_view s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  for (auto& c : split_csv(s)) out.push_back(std::move(c));
  return out;
}

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidData("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw InvalidData("error reading " + path.string());
  return std::move(ss).str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidData("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InvalidData("error writing " + path.string());
}

// ---- tensor format ----

std::string encode_tensor(const Tensor& t) {
  std::string out = "TNSR";
  out.push_back(static_cast<char>(kTensorVersion));
  out.push_back(static_cast<char>(t.order()));
  out.append(6, '\0');
  for (Index d : t.dims()) store_le(out, static_cast<std::uint64_t>(d));
  out.reserve(out.size() + 8 * static_cast<std::size_t>(t.size()));
  for (double v : t.values()) store_le(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Tensor decode_tensor(std::string_view bytes) {
  const std::size_t n = bytes.size();
  if (n < 4) throw FormatError("truncated tensor header", n);
  if (bytes.substr(0, 4) != "TNSR") throw FormatError("bad magic, expected TNSR", 0);
  if (n < kTensorHeaderBytes) throw FormatError("truncated tensor header", n);
  if (static_cast<std::uint8_t>(bytes[4]) != kTensorVersion)
    throw FormatError("unsupported tensor format version " + std::to_string(static_cast<unsigned char>(bytes[4])), 4);
  const int order = static_cast<unsigned char>(bytes[5]);
  if (order < 1) throw FormatError("tensor order must be at least 1", 5);
  for (std::size_t i = 6; i < kTensorHeaderBytes; ++i)
    if (bytes[i] != '\0') throw FormatError("reserved header byte is not zero", i);

  Dims dims;
  std::uint64_t count = 1;
  std::size_t pos = kTensorHeaderBytes;
  for (int k = 0; k < order; ++k, pos += 8) {
    if (pos + 8 > n) throw FormatError("truncated dimension list", pos);
    const std::uint64_t d = load_le<std::uint64_t>(bytes.data() + pos);
    if (d == 0) throw FormatError("dimension " + std::to_string(k + 1) + " is zero", pos);
    if (d > static_cast<std::uint64_t>(std::numeric_limits<Index>::max()) ||
        count > std::numeric_limits<std::uint64_t>::max() / 8 / d)
      throw FormatError("tensor dimensions overflow", pos);
    count *= d;
    dims.push_back(static_cast<Index>(d));
  }
  const std::size_t available = (n - pos) / 8;
  if (available < count) throw FormatError("truncated tensor data", pos + 8 * available);
  if (n - pos > 8 * count) throw FormatError("trailing bytes after tensor data", pos + 8 * count);

  Tensor t(std::move(dims));
  for (Index i = 0; i < t.size(); ++i, pos += 8)
    t.values()[i] = std::bit_cast<double>(load_le<std::uint64_t>(bytes.data() + pos));
  return t;
}

void write_tensor(const fs::path& path, const Tensor& t) { write_file(path, encode_tensor(t)); }

Tensor read_tensor(const fs::path& path) {
  try {
    return decode_tensor(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.offset());
  }
}

Tensor matrix_to_tensor(const Matrix& m) {
  Tensor t({m.rows(), m.cols()});
  t.values() = Eigen::Map<const Vector>(m.data(), m.size());
  return t;
}

Matrix tensor_to_matrix(const Tensor& t) {
  if (t.order() != 2) throw InvalidData("expected an order-2 tensor, got order " + std::to_string(t.order()));
  return Eigen::Map<const Matrix>(t.values().data(), t.dim(0), t.dim(1));
}

Tensor vector_to_tensor(const Vector& v) {
  Tensor t({v.size()});
  t.values() = v;
  return t;
}

Vector tensor_to_vector(const Tensor& t) {
  if (t.order() != 1) throw InvalidData("expected an order-1 tensor, got order " + std::to_string(t.order()));
  return t.values();
}

// ---- key=value ----

KeyValues parse_key_values(std::string_view text, const std::string& source) {
  KeyValues kv;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw InvalidData(source + ", line " + std::to_string(i + 1) + ": expected key=value");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw InvalidData(source + ", line " + std::to_string(i + 1) + ": empty key");
    kv[key] = std::string(trim(line.substr(eq + 1)));
  }
  return kv;
}

KeyValues read_key_values(const fs::path& path) { return parse_key_values(read_file(path), path.string()); }

void write_key_values(const fs::path& path, const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  write_file(path, out);
}

// ---- CP model ----

void write_model(const fs::path& dir, const CpModel& model) {
  fs::create_directories(dir);
  write_tensor(dir / "lambda.tnsr", vector_to_tensor(model.lambda));
  for (int n = 0; n < model.order(); ++n)
    write_tensor(dir / ("factor_" + std::to_string(n + 1) + ".tnsr"), matrix_to_tensor(model.factors[n]));
  write_key_values(dir / "model.txt", {{"order", std::to_string(model.order())},
                                       {"rank", std::to_string(model.rank())},
                                       {"fit", format_double(model.fit)},
                                       {"iterations", std::to_string(model.iterations)},
                                       {"converged", model.converged ? "true" : "false"}});
}

CpModel read_model(const fs::path& dir) {
  const auto meta_path = dir / "model.txt";
  const KeyValues kv = read_key_values(meta_path);
  CpModel model;
  const int order = parse_integer<int>(require_key(kv, "order", meta_path), meta_path.string() + " order");
  model.lambda = tensor_to_vector(read_tensor(dir / "lambda.tnsr"));
  model.fit = parse_real(require_key(kv, "fit", meta_path), meta_path.string() + " fit");
  model.iterations = parse_integer<int>(require_key(kv, "iterations", meta_path), meta_path.string() + " iterations");
  model.converged = require_key(kv, "converged", meta_path) == "true";
  if (order < 1) throw InvalidData(meta_path.string() + ": order must be at least 1");
  for (int n = 0; n < order; ++n) {
    const auto path = dir / ("factor_" + std::to_string(n + 1) + ".tnsr");
    model.factors.push_back(tensor_to_matrix(read_tensor(path)));
    if (model.factors.back().cols() != model.lambda.size())
      throw InvalidData(path.string() + ": factor has " + std::to_string(model.factors.back().cols()) +
                        " columns but the model has rank " + std::to_string(model.lambda.size()));
  }
  return model;
}

// ---- chain ----

void write_chain(const fs::path& dir, const McmcChain& chain, const std::vector<std::string>& column_names) {
  if (chain.size() == 0) throw InvalidArgument("cannot persist an empty chain");
  const Index m = chain.size(), p = chain.covariates(), r = chain.rank();
  Tensor gamma({m, p, r}), sigma({m, r, r});
  for (Index s = 0; s < m; ++s) {
    for (Index j = 0; j < r; ++j) {
      for (Index i = 0; i < p; ++i) gamma(s, i, j) = chain.gamma_star[s](i, j);
      for (Index i = 0; i < r; ++i) sigma(s, i, j) = chain.sigma[s](i, j);
    }
  }
  fs::create_directories(dir);
  write_tensor(dir / "gamma_star.tnsr", gamma);
  write_tensor(dir / "sigma.tnsr", sigma);
  write_key_values(dir / "chain.txt", {{"n_total", std::to_string(chain.n_total)},
                                       {"burn_in", std::to_string(chain.burn_in)},
                                       {"thin", std::to_string(chain.thin)},
                                       {"seed", std::to_string(chain.seed)},
                                       {"columns", join(column_names, ',')}});
}

StoredChain read_chain(const fs::path& dir) {
  const auto meta_path = dir / "chain.txt";
  const KeyValues kv = read_key_values(meta_path);
  const Tensor gamma = read_tensor(dir / "gamma_star.tnsr");
  const Tensor sigma = read_tensor(dir / "sigma.tnsr");
  if (gamma.order() != 3 || sigma.order() != 3 || sigma.dim(0) != gamma.dim(0) || sigma.dim(1) != gamma.dim(2) ||
      sigma.dim(2) != gamma.dim(2))
    throw InvalidData(dir.string() + ": chain tensors have inconsistent shapes " + dims_string(gamma.dims()) +
                      " and " + dims_string(sigma.dims()));

  StoredChain out;
  auto& c = out.chain;
  c.n_total = parse_integer<int>(require_key(kv, "n_total", meta_path), meta_path.string() + " n_total");
  c.burn_in = parse_integer<int>(require_key(kv, "burn_in", meta_path), meta_path.string() + " burn_in");
  c.thin = parse_integer<int>(require_key(kv, "thin", meta_path), meta_path.string() + " thin");
  c.seed = parse_integer<std::uint64_t>(require_key(kv, "seed", meta_path), meta_path.string() + " seed");
  out.column_names = split_names(require_key(kv, "columns", meta_path));
  const Index m = gamma.dim(0), p = gamma.dim(1), r = gamma.dim(2);
  if (!out.column_names.empty() && static_cast<Index>(out.column_names.size()) != p)
    throw InvalidData(meta_path.string() + ": " + std::to_string(out.column_names.size()) +
                      " column names for " + std::to_string(p) + " covariates");
  for (Index s = 0; s < m; ++s) {
    Matrix g(p, r), sg(r, r);
    for (Index j = 0; j < r; ++j) {
      for (Index i = 0; i < p; ++i) g(i, j) = gamma(s, i, j);
      for (Index i = 0; i < r; ++i) sg(i, j) = sigma(s, i, j);
    }
    c.gamma_star.push_back(std::move(g));
    c.sigma.push_back(std::move(sg));
  }
  return out;
}

// ---- covariates ----

CovariateTable parse_covariates(std::string_view text, const std::string& source, const CovariateOptions& opts) {
  const auto lines = split_lines(text);
  std::size_t li = 0;
  while (li < lines.size() && trim(lines[li]).empty()) ++li;
  if (li == lines.size()) throw InvalidData(source + ": covariate file is empty");
  const auto header = split_csv(lines[li]);
  if (header.front() != "subject_id")
    throw InvalidData(source + ", line " + std::to_string(li + 1) + ": first column must be subject_id, got '" +
                      header.front() + "'");
  const std::vector<std::string> names(header.begin() + 1, header.end());
  {
    std::set<std::string> seen;
    for (const auto& name : names) {
      if (name.empty()) throw InvalidData(source + ": empty column name in header");
      if (!seen.insert(name).second) throw InvalidData(source + ": duplicate column '" + name + "'");
      if (opts.add_intercept && name == "intercept")
        throw InvalidData(source + ": column 'intercept' clashes with the added intercept");
    }
  }

  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  std::unordered_map<std::string, std::size_t> line_of;
  for (++li; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    const std::string where = source + ", line " + std::to_string(li + 1);
    const auto cells = split_csv(lines[li]);
    if (cells.size() != header.size())
      throw InvalidData(where + ": expected " + std::to_string(header.size()) + " cells, found " +
                        std::to_string(cells.size()));
    if (cells[0].empty()) throw InvalidData(where + ": empty subject_id");
    if (const auto [it, fresh] = line_of.emplace(cells[0], li + 1); !fresh)
      throw InvalidData(where + ": duplicate subject_id '" + cells[0] + "' (first seen on line " +
                        std::to_string(it->second) + ")");
    std::vector<double> row;
    for (std::size_t j = 1; j < cells.size(); ++j) {
      double v = 0;
      if (!parse_double(cells[j], v))
        throw InvalidData(where + ", column '" + header[j] + "': non-numeric value '" + cells[j] + "'");
      row.push_back(v);
    }
    ids.push_back(cells[0]);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidData(source + ": no subject rows");

  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (!opts.subject_order.empty()) {
    if (opts.subject_order.size() != rows.size())
      throw InvalidData(source + ": subject order lists " + std::to_string(opts.subject_order.size()) +
                        " ids but the file has " + std::to_string(rows.size()) + " rows");
    std::unordered_map<std::string, std::size_t> index_of;
    for (std::size_t i = 0; i < ids.size(); ++i) index_of[ids[i]] = i;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const auto it = index_of.find(opts.subject_order[i]);
      if (it == index_of.end())
        throw InvalidData(source + ": subject '" + opts.subject_order[i] + "' is not in the covariate file");
      order[i] = it->second;
    }
  }
  if (opts.expected_rows >= 0 && static_cast<Index>(rows.size()) != opts.expected_rows)
    throw InvalidData(source + ": " + std::to_string(rows.size()) + " subject rows but the data has " +
                      std::to_string(opts.expected_rows) + " subjects");

  CovariateTable table;
  const Index offset = opts.add_intercept ? 1 : 0;
  const Index p = static_cast<Index>(names.size()) + offset;
  if (p == 0) throw InvalidData(source + ": design has no columns");
  table.z.resize(static_cast<Index>(rows.size()), p);
  if (opts.add_intercept) table.column_names.push_back("intercept");
  table.column_names.insert(table.column_names.end(), names.begin(), names.end());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& row = rows[order[i]];
    const Index r = static_cast<Index>(i);
    if (opts.add_intercept) table.z(r, 0) = 1;
    for (std::size_t j = 0; j < row.size(); ++j) table.z(r, static_cast<Index>(j) + offset) = row[j];
    table.subject_ids.push_back(ids[order[i]]);
  }
  return table;
}

CovariateTable read_covariates(const fs::path& path, const CovariateOptions& opts) {
  return parse_covariates(read_file(path), path.string(), opts);
}

void write_covariates(const fs::path& path, const std::vector<std::string>& subject_ids, const Matrix& columns,
                      const std::vector<std::string>& column_names) {
  if (static_cast<Index>(subject_ids.size()) != columns.rows() ||
      static_cast<Index>(column_names.size()) != columns.cols())
    throw InvalidArgument("covariate table shape does not match its labels");
  std::string out = "subject_id";
  for (const auto& n : column_names) out += "," + n;
  out += "\n";
  for (Index i = 0; i < columns.rows(); ++i) {
    out += subject_ids[static_cast<std::size_t>(i)];
    for (Index j = 0; j < columns.cols(); ++j) out += "," + format_double(columns(i, j));
    out += "\n";
  }
  write_file(path, out);
}

// ---- NIfTI-1 ----

NiftiVolume decode_nifti1(std::string_view bytes) {
  using Reason = UnsupportedFormat::Reason;
  if (bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0x1F && static_cast<unsigned char>(bytes[1]) == 0x8B)
    throw UnsupportedFormat(Reason::Compressed, "compressed NIfTI (gzip) is unsupported; decompress the .nii.gz first");
  constexpr std::size_t kHeader = 348;
  if (bytes.size() < kHeader) throw FormatError("truncated NIfTI-1 header", bytes.size());

  const char* h = bytes.data();
  bool swap = false;
  if (load_le<std::uint32_t>(h) != kHeader) {
    if (load_endian<std::uint32_t>(h, true) != kHeader)
      throw UnsupportedFormat(Reason::BadHeaderSize,
                              "sizeof_hdr is " + std::to_string(load_le<std::uint32_t>(h)) + ", expected 348");
    swap = true;
  }
  if (std::memcmp(h + 344, "n+1\0", 4) != 0)
    throw UnsupportedFormat(Reason::BadMagic, std::memcmp(h + 344, "ni1\0", 4) == 0
                                                  ? "two-file NIfTI (.hdr/.img) is unsupported"
                                                  : "bad NIfTI-1 magic, expected \"n+1\"");

  auto i16 = [&](std::size_t off) { return static_cast<std::int16_t>(load_endian<std::uint16_t>(h + off, swap)); };
  auto f32 = [&](std::size_t off) {
    return static_cast<double>(std::bit_cast<float>(load_endian<std::uint32_t>(h + off, swap)));
  };

  const int ndim = i16(40);
  if (ndim != 3)
    throw UnsupportedFormat(Reason::Dimensionality, "NIfTI dim[0] is " + std::to_string(ndim) + ", expected 3");
  Dims dims;
  for (int k = 1; k <= 3; ++k) {
    const int d = i16(40 + 2 * static_cast<std::size_t>(k));
    if (d < 1) throw FormatError("NIfTI dim[" + std::to_string(k) + "] must be positive", 40 + 2 * k);
    dims.push_back(d);
  }

  const int datatype = i16(70), bitpix = i16(72);
  std::size_t width = 0;
  if (datatype == 16) width = 4;
  else if (datatype == 64) width = 8;
  else
    throw UnsupportedFormat(Reason::Datatype, "NIfTI datatype " + std::to_string(datatype) +
                                                  " is unsupported (only 16 float32 and 64 float64)");
  if (bitpix != static_cast<int>(8 * width))
    throw FormatError("bitpix " + std::to_string(bitpix) + " does not match the datatype", 72);

  const double slope = f32(112), inter = f32(116);
  if (!(slope == 0 || slope == 1) || (slope == 1 && inter != 0))
    throw UnsupportedFormat(Reason::Scaling, "NIfTI intensity scaling (scl_slope " + format_double(slope) +
                                                 ", scl_inter " + format_double(inter) + ") is unsupported");

  const double vox_offset = f32(108);
  if (!(vox_offset >= static_cast<double>(kHeader)) || vox_offset != std::floor(vox_offset))
    throw FormatError("invalid vox_offset " + format_double(vox_offset), 108);

  NiftiVolume vol;
  for (int k = 0; k < 3; ++k) vol.voxel_size[static_cast<std::size_t>(k)] = f32(80 + 4 * static_cast<std::size_t>(k));
  vol.data = Tensor(std::move(dims));
  std::size_t pos = static_cast<std::size_t>(vox_offset);
  const std::size_t need = static_cast<std::size_t>(vol.data.size()) * width;
  if (pos > bytes.size() || bytes.size() - pos < need) {
    const std::size_t have = pos > bytes.size() ? 0 : (bytes.size() - pos) / width;
    throw FormatError("truncated NIfTI voxel data", std::min(pos, bytes.size()) + have * width);
  }
  for (Index i = 0; i < vol.data.size(); ++i, pos += width) {
    const double v = width == 4 ? static_cast<double>(std::bit_cast<float>(load_endian<std::uint32_t>(h + pos, swap)))
                                : std::bit_cast<double>(load_endian<std::uint64_t>(h + pos, swap));
    vol.data.values()[i] = v;
  }
  return vol;
}

NiftiVolume read_nifti1(const fs::path& path) {
  const std::string bytes = read_file(path);
  try {
    return decode_nifti1(bytes);
  } catch (const UnsupportedFormat& e) {
    throw UnsupportedFormat(e.reason(), path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.offset());
  }
}

Tensor read_volume(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".nii" || ext == ".gz") return read_nifti1(path).data;
  Tensor t = read_tensor(path);
  if (t.order() != 3) throw InvalidData(path.string() + ": expected a 3D volume, got order " + std::to_string(t.order()));
  return t;
}

Tensor read_volume_stack(const std::vector<fs::path>& paths) {
  if (paths.empty()) throw InvalidArgument("no input volumes given");
  std::vector<Tensor> vols;
  for (const auto& p : paths) {
    vols.push_back(read_volume(p));
    if (vols.back().dims() != vols.front().dims())
      throw InvalidData(p.string() + ": volume dims " + dims_string(vols.back().dims()) + " differ from " +
                        dims_string(vols.front().dims()) + " of " + paths.front().string());
  }
  return stack(vols);
}

std::vector<fs::path> read_path_list(const fs::path& list) {
  const std::string text = read_file(list);
  std::vector<fs::path> out;
  for (auto line : split_lines(text)) {
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    fs::path p{std::string(line)};
    out.push_back(p.is_relative() ? list.parent_path() / p : p);
  }
  if (out.empty()) throw InvalidData(list.string() + ": no volume paths listed");
  return out;
}

// ---- result tables ----

void write_clusters_csv(const fs::path& path, const std::vector<Cluster>& clusters) {
  std::string out = "cluster_id,size,peak_i,peak_j,peak_k,peak_value\n";
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const auto& cl = clusters[c];
    out += std::to_string(c + 1) + "," + std::to_string(cl.size) + "," + std::to_string(cl.peak[0]) + "," +
           std::to_string(cl.peak[1]) + "," + std::to_string(cl.peak[2]) + "," + format_double(cl.peak_value) + "\n";
  }
  write_file(path, out);
}

std::vector<ClusterRow> read_clusters_csv(const fs::path& path) {
  const std::string text = read_file(path);
  const auto lines = split_lines(text);
  if (lines.empty() || split_csv(lines[0]) != std::vector<std::string>{"cluster_id", "size", "peak_i", "peak_j",
                                                                        "peak_k", "peak_value"})
    throw InvalidData(path.string() + ": not a cluster table");
  std::vector<ClusterRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const std::string where = path.string() + ", line " + std::to_string(i + 1);
    const auto cells = split_csv(lines[i]);
    if (cells.size() != 6) throw InvalidData(where + ": expected 6 cells");
    ClusterRow r;
    r.id = parse_integer<Index>(cells[0], where);
    r.size = parse_integer<Index>(cells[1], where);
    for (int k = 0; k < 3; ++k) r.peak[static_cast<std::size_t>(k)] = parse_integer<Index>(cells[2 + static_cast<std::size_t>(k)], where);
    r.peak_value = parse_real(cells[5], where);
    rows.push_back(r);
  }
  return rows;
}

void write_rank_table(const fs::path& path, const CvResult& result) {
  std::string out = "rank,mean_error";
  for (Index f = 0; f < result.fold_errors.rows(); ++f) out += ",fold_" + std::to_string(f + 1);
  out += "\n";
  for (std::size_t r = 0; r < result.ranks.size(); ++r) {
    const Index c = static_cast<Index>(r);
    out += std::to_string(result.ranks[r]) + "," + format_double(result.per_rank_error[c]);
    for (Index f = 0; f < result.fold_errors.rows(); ++f) out += "," + format_double(result.fold_errors(f, c));
    out += "\n";
  }
  write_file(path, out);
}

CvResult read_rank_table(const fs::path& path) {
  const std::string text = read_file(path);
  std::vector<std::vector<std::string>> rows;
  for (auto line : split_lines(text))
    if (!trim(line).empty()) rows.push_back(split_csv(line));
  if (rows.size() < 2 || rows[0].size() < 3 || rows[0][0] != "rank" || rows[0][1] != "mean_error")
    throw InvalidData(path.string() + ": not a rank table");
  const Index folds = static_cast<Index>(rows[0].size()) - 2;
  CvResult res;
  res.per_rank_error.resize(static_cast<Index>(rows.size()) - 1);
  res.fold_errors.resize(folds, static_cast<Index>(rows.size()) - 1);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::string where = path.string() + ", line " + std::to_string(i + 1);
    if (rows[i].size() != rows[0].size()) throw InvalidData(where + ": wrong number of cells");
    const Index c = static_cast<Index>(i) - 1;
    res.ranks.push_back(parse_integer<Index>(rows[i][0], where));
    res.per_rank_error[c] = parse_real(rows[i][1], where);
    for (Index f = 0; f < folds; ++f) res.fold_errors(f, c) = parse_real(rows[i][2 + static_cast<std::size_t>(f)], where);
  }
  Index best = 0;
  for (Index c = 1; c < res.per_rank_error.size(); ++c)
    if (res.per_rank_error[c] < res.per_rank_error[best]) best = c;
  res.selected_rank = res.ranks[static_cast<std::size_t>(best)];
  return res;
}

}  // namespace cpfos::io
