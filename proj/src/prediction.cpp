#include "cvemap/prediction.hpp"

#include <algorithm>
#include <numeric>

namespace cvemap {

std::vector<int> rank_ids(const std::vector<double>& scores) {
  std::vector<int> ids(scores.size());
  std::iota(ids.begin(), ids.end(), 1);
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
    const double sa = scores[a - 1], sb = scores[b - 1];
    if (sa != sb) return sa > sb;
    return a < b;
  });
  return ids;
}

}  // namespace cvemap
