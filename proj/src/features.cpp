#include "resqos/features.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "resqos/errors.hpp"

namespace resqos {

BinningScheme::BinningScheme(int k_intervals, double max_qos)
    : k(k_intervals), qos_max(max_qos) {
  if (k < 1) throw ConfigError("number of intervals must be >= 1");
  if (!(qos_max > 0.0)) throw ConfigError("qos_max must be positive");
}

int bin_index(double qos, const BinningScheme& scheme) {
  if (qos < 0.0) {
    throw ConfigError("qos must be non-negative, got " + std::to_string(qos));
  }
  const auto bin = static_cast<int>(std::floor(qos / scheme.interval_width()));
  return bin >= scheme.k ? scheme.k - 1 : bin;
}

DistributionSet::DistributionSet(const BinningScheme& scheme, int n_users,
                                 int n_services)
    : scheme_(scheme),
      n_users_(n_users),
      n_services_(n_services),
      user_counts_(static_cast<std::size_t>(n_users) * scheme.k, 0),
      service_counts_(static_cast<std::size_t>(n_services) * scheme.k, 0),
      user_probs_(static_cast<std::size_t>(n_users) * scheme.k, 0.0),
      service_probs_(static_cast<std::size_t>(n_services) * scheme.k, 0.0) {
  if (n_users < 0 || n_services < 0) {
    throw ConfigError("subject counts must be non-negative");
  }
}

std::span<const double> DistributionSet::user(int user_id) const {
  return {user_probs_.data() + static_cast<std::size_t>(user_id) * k(),
          static_cast<std::size_t>(k())};
}

std::span<const double> DistributionSet::service(int service_id) const {
  return {service_probs_.data() + static_cast<std::size_t>(service_id) * k(),
          static_cast<std::size_t>(k())};
}

std::span<const std::int64_t> DistributionSet::user_counts(int user_id) const {
  return {user_counts_.data() + static_cast<std::size_t>(user_id) * k(),
          static_cast<std::size_t>(k())};
}

std::span<const std::int64_t> DistributionSet::service_counts(
    int service_id) const {
  return {service_counts_.data() + static_cast<std::size_t>(service_id) * k(),
          static_cast<std::size_t>(k())};
}

std::int64_t DistributionSet::user_total(int user_id) const {
  std::int64_t total = 0;
  for (auto c : user_counts(user_id)) total += c;
  return total;
}

std::int64_t DistributionSet::service_total(int service_id) const {
  std::int64_t total = 0;
  for (auto c : service_counts(service_id)) total += c;
  return total;
}

void DistributionSet::add_user_count(int user_id, int bin) {
  user_counts_[static_cast<std::size_t>(user_id) * k() + bin] += 1;
}

void DistributionSet::add_service_count(int service_id, int bin) {
  service_counts_[static_cast<std::size_t>(service_id) * k() + bin] += 1;
}

void DistributionSet::finalize() {
  auto to_probs = [this](const std::vector<std::int64_t>& counts,
                         std::vector<double>& probs, int n_subjects) {
    for (int subject = 0; subject < n_subjects; ++subject) {
      const std::size_t base = static_cast<std::size_t>(subject) * k();
      std::int64_t total = 0;
      for (int b = 0; b < k(); ++b) total += counts[base + b];
      if (total == 0) continue;  // no history: stays all-zero
      for (int b = 0; b < k(); ++b) {
        probs[base + b] =
            static_cast<double>(counts[base + b]) / static_cast<double>(total);
      }
    }
  };
  to_probs(user_counts_, user_probs_, n_users_);
  to_probs(service_counts_, service_probs_, n_services_);
}

DistributionSet compute_distributions(std::span<const InvocationRecord> train,
                                      const BinningScheme& scheme, int n_users,
                                      int n_services) {
  DistributionSet dist(scheme, n_users, n_services);
  for (const auto& rec : train) {
    const int bin = bin_index(rec.qos, scheme);
    dist.add_user_count(rec.user_id, bin);
    dist.add_service_count(rec.service_id, bin);
  }
  dist.finalize();
  return dist;
}

RawInput assemble_raw_input(const InvocationRecord& record,
                            const DistributionSet& distributions) {
  if (record.user_id < 0 || record.user_id >= distributions.n_users()) {
    throw ConfigError("user ID " + std::to_string(record.user_id) +
                      " out of range");
  }
  if (record.service_id < 0 ||
      record.service_id >= distributions.n_services()) {
    throw ConfigError("service ID " + std::to_string(record.service_id) +
                      " out of range");
  }
  RawInput input;
  input.user_id = record.user_id;
  input.service_id = record.service_id;
  input.user_country_code = record.user_country_code;
  input.user_as_code = record.user_as_code;
  input.service_country_code = record.service_country_code;
  input.service_as_code = record.service_as_code;
  const auto pu = distributions.user(record.user_id);
  const auto ps = distributions.service(record.service_id);
  input.p_user.assign(pu.begin(), pu.end());
  input.p_service.assign(ps.begin(), ps.end());
  return input;
}

void write_distribution_dump(const std::filesystem::path& path,
                             const DistributionSet& distributions,
                             bool with_counts) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "subject_type,subject_id";
  for (int b = 0; b < distributions.k(); ++b) out << ",p_" << b;
  if (with_counts) {
    for (int b = 0; b < distributions.k(); ++b) out << ",count_" << b;
  }
  out << '\n';

  char buf[32];
  auto emit = [&](const char* type, int id, std::span<const double> probs,
                  std::span<const std::int64_t> counts) {
    out << type << ',' << id;
    for (double p : probs) {
      std::snprintf(buf, sizeof(buf), "%.9g", p);
      out << ',' << buf;
    }
    if (with_counts) {
      for (auto c : counts) out << ',' << c;
    }
    out << '\n';
  };
  for (int u = 0; u < distributions.n_users(); ++u) {
    emit("user", u, distributions.user(u), distributions.user_counts(u));
  }
  for (int s = 0; s < distributions.n_services(); ++s) {
    emit("service", s, distributions.service(s),
         distributions.service_counts(s));
  }
}

}  // namespace resqos
