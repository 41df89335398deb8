#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace resqos {

// Dense user x service QoS matrix. Entries < 0 mark invocations that never
// happened (or timed out); everything else is a response time in seconds.
class QosMatrix {
 public:
  QosMatrix(int n_users, int n_services)
      : n_users_(n_users),
        n_services_(n_services),
        values_(static_cast<std::size_t>(n_users) * n_services, -1.0) {}

  int n_users() const { return n_users_; }
  int n_services() const { return n_services_; }

  double operator()(int u, int s) const {
    return values_[static_cast<std::size_t>(u) * n_services_ + s];
  }
  double& operator()(int u, int s) {
    return values_[static_cast<std::size_t>(u) * n_services_ + s];
  }

  bool is_valid(int u, int s) const { return (*this)(u, s) >= 0.0; }
  std::size_t count_valid() const;

 private:
  int n_users_;
  int n_services_;
  std::vector<double> values_;  // row-major
};

struct UserRecord {
  int user_id = 0;
  std::string country;
  std::string as_name;
  // Remaining columns (IP, lat/lon, ...) kept verbatim but unused.
  std::vector<std::pair<std::string, std::string>> extra;
};

struct ServiceRecord {
  int service_id = 0;
  std::string country;
  std::string as_name;
  std::vector<std::pair<std::string, std::string>> extra;
};

// String -> dense code mapping, codes assigned in first-appearance order.
class Vocabulary {
 public:
  explicit Vocabulary(std::string name) : name_(std::move(name)) {}

  const std::string& name() const { return name_; }
  int size() const { return static_cast<int>(tokens_.size()); }

  // Inserts the token if unseen; returns its code.
  int add(const std::string& token);
  // Lookup only; throws DataError on unknown token.
  int encode(const std::string& token) const;
  const std::string& decode(int code) const;
  bool contains(const std::string& token) const {
    return codes_.count(token) != 0;
  }

 private:
  std::string name_;
  std::unordered_map<std::string, int> codes_;
  std::vector<std::string> tokens_;
};

struct Vocabularies {
  Vocabulary user_country{"user-country"};
  Vocabulary user_as{"user-as"};
  Vocabulary service_country{"service-country"};
  Vocabulary service_as{"service-as"};
};

// One valid matrix entry joined with both parties' location codes.
struct InvocationRecord {
  int user_id = 0;
  int service_id = 0;
  double qos = 0.0;  // seconds
  int user_country_code = 0;
  int user_as_code = 0;
  int service_country_code = 0;
  int service_as_code = 0;
};

struct DatasetSplit {
  std::vector<InvocationRecord> train;
  std::vector<InvocationRecord> test;
  std::vector<std::int64_t> train_indices;  // sorted positions into the record list
  double density = 0.0;
  std::uint64_t seed = 0;
};

// Whitespace-separated numeric grid; negative entries are the invalid
// sentinel. Dimension or token problems raise ParseError with coordinates.
QosMatrix load_qos_matrix(const std::filesystem::path& path, int n_users,
                          int n_services);

// Tab-separated WS-DREAM tables with one header line. Only ID, Country and AS
// are consumed; remaining columns are retained in `extra`.
std::vector<UserRecord> load_users(const std::filesystem::path& path);
std::vector<ServiceRecord> load_services(const std::filesystem::path& path);

Vocabularies build_vocabularies(const std::vector<UserRecord>& users,
                                const std::vector<ServiceRecord>& services);

// One record per valid entry, row-major scan order.
std::vector<InvocationRecord> matrix_to_records(
    const QosMatrix& matrix, const std::vector<UserRecord>& users,
    const std::vector<ServiceRecord>& services, const Vocabularies& vocabs);

// Uniform sample without replacement of floor(density * N) records as train,
// remainder as test. Deterministic in (records, density, seed).
DatasetSplit split_by_density(const std::vector<InvocationRecord>& records,
                              double density, std::uint64_t seed);

// Split manifest: JSON {density, seed, n_records, train_indices}.
void write_split_manifest(const std::filesystem::path& path,
                          const DatasetSplit& split);
DatasetSplit read_split_manifest(const std::filesystem::path& path,
                                 const std::vector<InvocationRecord>& records);

}  // namespace resqos
