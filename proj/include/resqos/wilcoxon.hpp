#pragma once

#include <span>

namespace resqos {

struct WilcoxonResult {
  double statistic = 0.0;  // W+: rank sum of positive differences
  double p_value = 1.0;    // two-sided, normal approximation
  int n_nonzero = 0;       // pairs remaining after dropping zero differences
};

// Paired two-sided Wilcoxon signed-rank test on a[i] - b[i]. Zero differences
// are dropped, tied magnitudes get mid-ranks, and the normal approximation
// applies a tie-corrected variance and a 0.5 continuity correction. Requires
// at least 5 nonzero differences.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a,
                                    std::span<const double> b);

}  // namespace resqos
