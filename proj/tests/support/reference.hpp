#pragma once

#include <array>

namespace reference {

// Allocated capitals for the fitted four-stock model (BA, AXP, XOM, CVX), units of 1e-2.
struct Row {
  double alpha;
  std::array<double, 4> cte, tv, tcm3;
};

inline constexpr std::array<Row, 6> kFittedCapitals{{
    {0.950, {1.367, 1.042, 1.051, 0.984}, {1.941, 1.826, 1.165, 1.317}, {84.616, 132.798, -11.467, 39.308}},
    {0.960, {1.482, 1.136, 1.137, 1.067}, {2.208, 2.105, 1.293, 1.489}, {103.534, 163.942, -15.735, 47.600}},
    {0.970, {1.640, 1.266, 1.254, 1.181}, {2.614, 2.536, 1.480, 1.748}, {134.353, 215.154, -23.241, 60.949}},
    {0.980, {1.884, 1.468, 1.432, 1.356}, {3.331, 3.314, 1.790, 2.199}, {194.097, 315.683, -39.261, 86.399}},
    {0.990, {2.369, 1.878, 1.778, 1.701}, {5.091, 5.303, 2.456, 3.280}, {364.372, 608.061, -91.787, 156.936}},
    {0.999, {4.918, 4.180, 3.422, 3.463}, {22.113, 27.396, 5.563, 12.761}, {2940.939, 5323.095, -1227.183, 1125.261}},
}};

}  // namespace reference
