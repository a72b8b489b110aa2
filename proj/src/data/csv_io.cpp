#include "ltood/data/csv_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "ltood/error.hpp"

namespace ltood::data {

namespace {

std::string header(std::size_t dim, bool labeled) {
  std::string h;
  for (std::size_t j = 0; j < dim; ++j) {
    if (j) h += ',';
    h += 'f' + std::to_string(j);
  }
  if (labeled) h += dim ? ",label" : "label";
  return h;
}

void append_double(std::string& out, double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("to_chars failed");
  out.append(buf, end);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

void write_rows(std::ostream& os, const nd::Tensor& features,
                const std::vector<int>* labels) {
  std::string line;
  for (std::size_t r = 0; r < features.rows(); ++r) {
    line.clear();
    auto row = features.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) line += ',';
      append_double(line, row[j]);
    }
    if (labels) {
      if (!row.empty()) line += ',';
      line += std::to_string((*labels)[r]);
    }
    line += '\n';
    os << line;
  }
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

struct Parsed {
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t rows = 0;
};

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t line,
                       const std::string& what) {
  throw ParseError(path.string() + ":" + std::to_string(line) + ": " + what);
}

Parsed parse(const std::filesystem::path& path, std::size_t dim,
             bool want_label, std::optional<int> num_classes) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(is, line)) fail(path, 1, "missing header row");
  ++lineno;
  const auto cols = split_fields(trim(line));
  std::vector<int> feature_col(dim, -1);
  int label_col = -1;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const auto name = trim(cols[i]);
    if (name == "label") {
      label_col = static_cast<int>(i);
      continue;
    }
    if (name.size() > 1 && name[0] == 'f') {
      std::size_t j = 0;
      auto [p, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), j);
      if (ec == std::errc() && p == name.data() + name.size() && j < dim) {
        feature_col[j] = static_cast<int>(i);
        continue;
      }
    }
    fail(path, 1, "unexpected column '" + std::string(name) + "'");
  }
  for (std::size_t j = 0; j < dim; ++j) {
    if (feature_col[j] < 0) fail(path, 1, "missing column f" + std::to_string(j));
  }
  if (want_label && label_col < 0) fail(path, 1, "missing column label");

  Parsed out;
  while (std::getline(is, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto fields = split_fields(t);
    if (fields.size() != cols.size()) {
      fail(path, lineno, "expected " + std::to_string(cols.size()) +
                             " fields, got " + std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < dim; ++j) {
      const auto f = trim(fields[static_cast<std::size_t>(feature_col[j])]);
      double v = 0.0;
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || p != f.data() + f.size() || f.empty()) {
        fail(path, lineno, "bad number '" + std::string(f) + "' in column f" +
                               std::to_string(j));
      }
      out.values.push_back(v);
    }
    if (want_label) {
      const auto f = trim(fields[static_cast<std::size_t>(label_col)]);
      int lab = 0;
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), lab);
      if (ec != std::errc() || p != f.data() + f.size() || f.empty()) {
        fail(path, lineno, "bad label '" + std::string(f) + "'");
      }
      if (lab < 0 || (num_classes && lab > *num_classes)) {
        fail(path, lineno, "label " + std::to_string(lab) + " out of range");
      }
      out.labels.push_back(lab);
    }
    ++out.rows;
  }
  return out;
}

}  // namespace

void save_csv(const std::filesystem::path& path, const LabeledDataset& ds) {
  auto os = open_out(path);
  os << header(ds.dim(), true) << '\n';
  write_rows(os, ds.features, &ds.labels);
}

void save_csv(const std::filesystem::path& path, const OutlierPool& pool) {
  auto os = open_out(path);
  os << header(pool.dim(), false) << '\n';
  write_rows(os, pool.features, nullptr);
}

LabeledDataset load_labeled_csv(const std::filesystem::path& path,
                                const CsvSchema& schema, Split split) {
  auto p = parse(path, schema.dim, true, schema.num_classes);
  LabeledDataset ds;
  ds.split = split;
  ds.features = nd::Tensor({p.rows, schema.dim}, std::move(p.values));
  ds.labels = std::move(p.labels);
  return ds;
}

OutlierPool load_pool_csv(const std::filesystem::path& path, std::size_t dim) {
  auto p = parse(path, dim, false, std::nullopt);
  OutlierPool pool;
  pool.features = nd::Tensor({p.rows, dim}, std::move(p.values));
  pool.generator = "csv:" + path.filename().string();
  return pool;
}

std::variant<LabeledDataset, OutlierPool> load_csv(
    const std::filesystem::path& path, const CsvSchema& schema) {
  if (schema.labeled) return load_labeled_csv(path, schema);
  return load_pool_csv(path, schema.dim);
}

}  // namespace ltood::data
