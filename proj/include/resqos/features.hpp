#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "resqos/dataset.hpp"

namespace resqos {

// K equal intervals over [0, qos_max]; values past qos_max clamp into the
// last bin.
struct BinningScheme {
  int k = 10;
  double qos_max = 20.0;

  BinningScheme() = default;
  BinningScheme(int k_intervals, double max_qos);

  double interval_width() const { return qos_max / k; }
};

// floor(qos / width), left-closed right-open bins, last bin right-closed.
int bin_index(double qos, const BinningScheme& scheme);

// Per-user and per-service interval proportions computed from the training
// partition only. Subjects with no training history get the all-zero vector.
class DistributionSet {
 public:
  DistributionSet(const BinningScheme& scheme, int n_users, int n_services);

  const BinningScheme& scheme() const { return scheme_; }
  int k() const { return scheme_.k; }
  int n_users() const { return n_users_; }
  int n_services() const { return n_services_; }

  std::span<const double> user(int user_id) const;
  std::span<const double> service(int service_id) const;
  std::span<const std::int64_t> user_counts(int user_id) const;
  std::span<const std::int64_t> service_counts(int service_id) const;
  std::int64_t user_total(int user_id) const;
  std::int64_t service_total(int service_id) const;

  void add_user_count(int user_id, int bin);
  void add_service_count(int service_id, int bin);
  // Turns accumulated counts into proportions.
  void finalize();

 private:
  BinningScheme scheme_;
  int n_users_;
  int n_services_;
  std::vector<std::int64_t> user_counts_;     // (n_users, K) row-major
  std::vector<std::int64_t> service_counts_;  // (n_services, K)
  std::vector<double> user_probs_;
  std::vector<double> service_probs_;
};

DistributionSet compute_distributions(std::span<const InvocationRecord> train,
                                      const BinningScheme& scheme, int n_users,
                                      int n_services);

// The model's raw 8-field input tuple.
struct RawInput {
  int user_id = 0;
  int service_id = 0;
  int user_country_code = 0;
  int user_as_code = 0;
  int service_country_code = 0;
  int service_as_code = 0;
  std::vector<double> p_user;
  std::vector<double> p_service;
};

RawInput assemble_raw_input(const InvocationRecord& record,
                            const DistributionSet& distributions);

// CSV dump: subject_type, subject_id, p_0..p_{K-1}; optional raw-count
// columns for debugging.
void write_distribution_dump(const std::filesystem::path& path,
                             const DistributionSet& distributions,
                             bool with_counts = false);

}  // namespace resqos
