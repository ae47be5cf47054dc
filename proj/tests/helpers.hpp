#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "vwdsim/gilbert_elliott.hpp"
#include "vwdsim/rng.hpp"

namespace testutil {

inline bool near(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

inline bool rel_near(double a, double b, double rel) {
  return std::fabs(a - b) <= rel * std::fabs(b);
}

inline vwdsim::GeChannelParams random_channel(vwdsim::Rng& rng, double lo = 0.05,
                                              double hi = 0.95) {
  return {lo + (hi - lo) * rng.next_double(), lo + (hi - lo) * rng.next_double()};
}

inline std::vector<vwdsim::GeChannelParams> random_channels(vwdsim::Rng& rng, int n,
                                                            double lo = 0.05,
                                                            double hi = 0.95) {
  std::vector<vwdsim::GeChannelParams> out;
  for (int i = 0; i < n; ++i) out.push_back(random_channel(rng, lo, hi));
  return out;
}

inline std::string read_file(const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) return {};
  std::string data;
  char buf[4096];
  size_t got;
  while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) data.append(buf, got);
  std::fclose(f);
  return data;
}

}  // namespace testutil
