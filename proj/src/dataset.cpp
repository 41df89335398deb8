#include "resqos/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "resqos/errors.hpp"
#include "resqos/rng.hpp"

namespace resqos {

namespace {

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

// WS-DREAM headers write column names as "[User ID]"; strip the brackets.
std::string normalize_column(std::string s) {
  s = trim(std::move(s));
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') {
    s = trim(s.substr(1, s.size() - 2));
  }
  return s;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

std::string read_stripped_line(std::istream& in, bool& ok) {
  std::string line;
  ok = static_cast<bool>(std::getline(in, line));
  if (ok && !line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

struct TableLayout {
  std::size_t id_col = 0;
  std::size_t country_col = 0;
  std::size_t as_col = 0;
  std::vector<std::string> columns;
};

TableLayout parse_header(const std::string& header_line, const char* id_name,
                         const std::filesystem::path& path) {
  TableLayout layout;
  for (auto& cell : split_tabs(header_line)) {
    layout.columns.push_back(normalize_column(cell));
  }
  auto find_col = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < layout.columns.size(); ++i) {
      if (layout.columns[i] == name) return i;
    }
    throw DataError("missing required column '" + name + "' in " +
                    path.string());
  };
  layout.id_col = find_col(id_name);
  layout.country_col = find_col("Country");
  layout.as_col = find_col("AS");
  return layout;
}

template <typename Record>
std::vector<Record> load_table(const std::filesystem::path& path,
                               const char* id_name,
                               int Record::*id_field) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());

  bool ok = false;
  const std::string header = read_stripped_line(in, ok);
  if (!ok) throw DataError("empty table file " + path.string());
  const TableLayout layout = parse_header(header, id_name, path);

  std::vector<Record> records;
  std::size_t line_no = 1;
  while (true) {
    const std::string line = read_stripped_line(in, ok);
    if (!ok) break;
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_tabs(line);
    if (cells.size() < layout.columns.size()) {
      throw ParseError("too few columns in " + path.string(), line_no - 1,
                       cells.size());
    }
    Record rec;
    const std::string id_text = trim(cells[layout.id_col]);
    int id = 0;
    auto [ptr, ec] =
        std::from_chars(id_text.data(), id_text.data() + id_text.size(), id);
    if (ec != std::errc{} || ptr != id_text.data() + id_text.size()) {
      throw ParseError("non-numeric ID '" + id_text + "' in " + path.string(),
                       line_no - 1, layout.id_col);
    }
    rec.*id_field = id;
    rec.country = trim(cells[layout.country_col]);
    rec.as_name = trim(cells[layout.as_col]);
    for (std::size_t i = 0; i < layout.columns.size(); ++i) {
      if (i == layout.id_col || i == layout.country_col || i == layout.as_col)
        continue;
      rec.extra.emplace_back(layout.columns[i], trim(cells[i]));
    }
    records.push_back(std::move(rec));
  }

  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].*id_field != static_cast<int>(i)) {
      throw DataError("IDs in " + path.string() +
                      " are not contiguous from 0 (line " +
                      std::to_string(i + 2) + " has ID " +
                      std::to_string(records[i].*id_field) + ")");
    }
  }
  return records;
}

}  // namespace

std::size_t QosMatrix::count_valid() const {
  std::size_t n = 0;
  for (double v : values_) {
    if (v >= 0.0) ++n;
  }
  return n;
}

int Vocabulary::add(const std::string& token) {
  auto it = codes_.find(token);
  if (it != codes_.end()) return it->second;
  const int code = static_cast<int>(tokens_.size());
  codes_.emplace(token, code);
  tokens_.push_back(token);
  return code;
}

int Vocabulary::encode(const std::string& token) const {
  auto it = codes_.find(token);
  if (it == codes_.end()) {
    throw DataError("unknown token '" + token + "' in vocabulary " + name_);
  }
  return it->second;
}

const std::string& Vocabulary::decode(int code) const {
  if (code < 0 || code >= size()) {
    throw DataError("code " + std::to_string(code) +
                    " out of range for vocabulary " + name_);
  }
  return tokens_[static_cast<std::size_t>(code)];
}

QosMatrix load_qos_matrix(const std::filesystem::path& path, int n_users,
                          int n_services) {
  if (n_users < 1 || n_services < 1) {
    throw ConfigError("matrix dimensions must be positive");
  }
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());

  QosMatrix matrix(n_users, n_services);
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    if (row >= n_users) {
      throw ParseError("more rows than the declared " +
                           std::to_string(n_users) + " users in " +
                           path.string(),
                       row, 0);
    }
    const char* p = line.data();
    const char* end = line.data() + line.size();
    int col = 0;
    while (p < end) {
      while (p < end && std::isspace(static_cast<unsigned char>(*p))) ++p;
      if (p >= end) break;
      if (col >= n_services) {
        throw ParseError("more columns than the declared " +
                             std::to_string(n_services) + " services in " +
                             path.string(),
                         row, col);
      }
      double value = 0.0;
      auto [next, ec] = std::from_chars(p, end, value);
      if (ec != std::errc{} ||
          (next < end && !std::isspace(static_cast<unsigned char>(*next)))) {
        throw ParseError("non-numeric token in " + path.string(), row, col);
      }
      if (!std::isfinite(value)) {
        throw ParseError("non-finite value in " + path.string(), row, col);
      }
      matrix(row, col) = value;
      ++col;
      p = next;
    }
    if (col != n_services) {
      throw ParseError("row has " + std::to_string(col) +
                           " columns, expected " + std::to_string(n_services) +
                           " in " + path.string(),
                       row, col);
    }
    ++row;
  }
  if (row != n_users) {
    throw ParseError("file has " + std::to_string(row) + " rows, expected " +
                         std::to_string(n_users) + " in " + path.string(),
                     row, 0);
  }
  return matrix;
}

std::vector<UserRecord> load_users(const std::filesystem::path& path) {
  return load_table<UserRecord>(path, "User ID", &UserRecord::user_id);
}

std::vector<ServiceRecord> load_services(const std::filesystem::path& path) {
  return load_table<ServiceRecord>(path, "Service ID",
                                   &ServiceRecord::service_id);
}

Vocabularies build_vocabularies(const std::vector<UserRecord>& users,
                                const std::vector<ServiceRecord>& services) {
  Vocabularies vocabs;
  for (const auto& u : users) {
    vocabs.user_country.add(u.country);
    vocabs.user_as.add(u.as_name);
  }
  for (const auto& s : services) {
    vocabs.service_country.add(s.country);
    vocabs.service_as.add(s.as_name);
  }
  return vocabs;
}

std::vector<InvocationRecord> matrix_to_records(
    const QosMatrix& matrix, const std::vector<UserRecord>& users,
    const std::vector<ServiceRecord>& services, const Vocabularies& vocabs) {
  if (static_cast<int>(users.size()) != matrix.n_users() ||
      static_cast<int>(services.size()) != matrix.n_services()) {
    throw ConfigError("matrix shape does not match user/service list sizes");
  }
  std::vector<InvocationRecord> records;
  records.reserve(matrix.count_valid());
  for (int u = 0; u < matrix.n_users(); ++u) {
    const int ucc = vocabs.user_country.encode(users[u].country);
    const int uac = vocabs.user_as.encode(users[u].as_name);
    for (int s = 0; s < matrix.n_services(); ++s) {
      if (!matrix.is_valid(u, s)) continue;
      InvocationRecord rec;
      rec.user_id = u;
      rec.service_id = s;
      rec.qos = matrix(u, s);
      rec.user_country_code = ucc;
      rec.user_as_code = uac;
      rec.service_country_code = vocabs.service_country.encode(services[s].country);
      rec.service_as_code = vocabs.service_as.encode(services[s].as_name);
      records.push_back(rec);
    }
  }
  return records;
}

DatasetSplit split_by_density(const std::vector<InvocationRecord>& records,
                              double density, std::uint64_t seed) {
  if (!(density > 0.0) || density > 1.0) {
    throw ConfigError("density must be in (0, 1], got " +
                      std::to_string(density));
  }
  const std::size_t n = records.size();
  const auto n_train = static_cast<std::size_t>(
      std::floor(density * static_cast<double>(n)));

  std::vector<std::int64_t> indices(n);
  for (std::size_t i = 0; i < n; ++i) indices[i] = static_cast<std::int64_t>(i);

  // Partial Fisher-Yates: the first n_train slots become the train sample.
  Rng rng(seed);
  for (std::size_t i = 0; i < n_train; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(indices[i], indices[j]);
  }

  DatasetSplit split;
  split.density = density;
  split.seed = seed;
  split.train_indices.assign(indices.begin(), indices.begin() + n_train);
  std::sort(split.train_indices.begin(), split.train_indices.end());

  std::vector<char> in_train(n, 0);
  for (auto idx : split.train_indices) in_train[idx] = 1;
  split.train.reserve(n_train);
  split.test.reserve(n - n_train);
  for (std::size_t i = 0; i < n; ++i) {
    (in_train[i] ? split.train : split.test).push_back(records[i]);
  }
  return split;
}

void write_split_manifest(const std::filesystem::path& path,
                          const DatasetSplit& split) {
  nlohmann::json j;
  j["density"] = split.density;
  j["seed"] = split.seed;
  j["n_records"] = split.train.size() + split.test.size();
  j["train_indices"] = split.train_indices;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump() << '\n';
}

DatasetSplit read_split_manifest(const std::filesystem::path& path,
                                 const std::vector<InvocationRecord>& records) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed split manifest " + path.string() + ": " +
                    e.what());
  }
  if (j.at("n_records").get<std::size_t>() != records.size()) {
    throw DataError("split manifest record count does not match the dataset");
  }
  DatasetSplit split;
  split.density = j.at("density").get<double>();
  split.seed = j.at("seed").get<std::uint64_t>();
  split.train_indices = j.at("train_indices").get<std::vector<std::int64_t>>();

  std::vector<char> in_train(records.size(), 0);
  for (auto idx : split.train_indices) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= records.size()) {
      throw DataError("split manifest index out of range");
    }
    in_train[idx] = 1;
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    (in_train[i] ? split.train : split.test).push_back(records[i]);
  }
  return split;
}

}  // namespace resqos
