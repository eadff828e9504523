#pragma once

#include <vector>

namespace lamc {

// Final hard assignment: every row carries exactly one label in [0, k) and
// every column exactly one label in [0, d).
struct LabelAssignment {
  std::vector<int> row_labels;
  std::vector<int> col_labels;
  int k = 0;
  int d = 0;
};

}  // namespace lamc
