#pragma once

#include <vector>

// Rating matrices with Fleiss' kappa evaluated in exact rational arithmetic
// (Python fractions.Fraction), stored as num/den.
struct KappaCase {
  std::vector<std::vector<int>> counts;
  long long num;
  long long den;
};

inline const std::vector<KappaCase>& kappa_oracle() {
  static const std::vector<KappaCase> cases = {
      {{{2, 1}, {1, 2}, {3, 0}}, 0, 1},
      {{{0, 0, 0, 0, 14}, {0, 2, 6, 4, 2}, {0, 0, 3, 5, 6}, {0, 3, 9, 2, 0}, {2, 2, 8, 1, 1},
        {7, 7, 0, 0, 0}, {3, 2, 6, 3, 0}, {2, 5, 3, 2, 2}, {6, 5, 2, 1, 0}, {0, 2, 2, 3, 7}},
       4211, 20059},
      {{{1, 1}, {1, 1}, {1, 1}}, -1, 1},
      {{{2, 0}, {0, 2}, {1, 1}, {2, 0}}, 7, 15},
      {{{3, 0, 0}, {0, 3, 0}, {0, 0, 3}, {1, 1, 1}}, 5, 8},
      {{{4, 1}, {3, 2}, {5, 0}, {0, 5}, {2, 3}}, 27, 77},
      {{{2, 1, 0}, {1, 1, 1}, {0, 2, 1}, {3, 0, 0}, {0, 0, 3}, {1, 2, 0}}, 26, 107},
      {{{1, 2}, {2, 1}, {1, 2}, {2, 1}}, -1, 3},
      {{{5, 0, 0, 0}, {0, 4, 1, 0}, {0, 0, 5, 0}, {1, 0, 0, 4}, {2, 2, 1, 0}, {0, 1, 1, 3}}, 329, 674},
      {{{1, 1}, {1, 1}, {2, 0}}, -1, 2},
  };
  return cases;
}
