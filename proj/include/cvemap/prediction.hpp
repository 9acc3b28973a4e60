#pragma once

#include <string>
#include <vector>

namespace cvemap {

// A 16-way score vector with its deterministic ranking. `techniques` holds
// the mapping for the argmax class.
struct Prediction {
  std::vector<double> scores;
  int argmax_id = 0;
  std::vector<int> ranked_ids;
  std::vector<std::string> techniques;
};

// Ids 1..N sorted by score descending; ties broken by ascending id.
std::vector<int> rank_ids(const std::vector<double>& scores);

}  // namespace cvemap
