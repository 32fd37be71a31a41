#ifndef LATENTDS_DETAIL_NUM_FORMAT_HPP
#define LATENTDS_DETAIL_NUM_FORMAT_HPP

#include <cstdio>
#include <string>

namespace latentds::detail {

// Shortest-width formatting that still round-trips IEEE doubles through text.
inline std::string g17(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

}  // namespace latentds::detail

#endif
