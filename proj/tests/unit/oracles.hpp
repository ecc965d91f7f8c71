#pragma once

// Reference values computed independently (mpmath, 30 digits) before the
// implementation was exercised.

namespace oracle {

inline constexpr double logistic_2 = 0.880797077977882444;      // logistic(2)
inline constexpr double logistic_075 = 0.679178699175392973;    // logistic(0.75)
inline constexpr double logistic_m1 = 0.268941421369995121;     // logistic(-1)
inline constexpr double grm_mid = 0.231058578630004879;         // logistic(1) - logistic(0)
// softmax({0, 1.5, 1})
inline constexpr double nrm[3] = {0.121951652309728857, 0.546549387266179638, 0.331498960424091505};

}  // namespace oracle
