#pragma once

#include <functional>
#include <random>

#include "ttiga/tt.hpp"

namespace ttiga {

/// Black-box tensor entry evaluator; idx is 0-based per mode.
using TensorSampler = std::function<double(const std::vector<int>&)>;

struct CrossOptions {
  double tol = 1e-10;        // relative sampled-residual target
  int max_rank = 60;         // per-bond rank cap
  int kick = 2;              // rank increment per adaptation round
  int max_sweeps = 40;
  long dense_cap = 1000000;  // below this, sample densely and use TT-SVD
  unsigned long seed = 20240601ULL;
};

struct CrossReport {
  bool converged = false;
  double residual = 0.0;  // relative max error on validation samples
  int sweeps = 0;
  long evaluations = 0;
};

/// Rank-adaptive TT-cross approximation of a sampled tensor. Small tensors
/// are densified and compressed directly; large ones use alternating
/// maxvol-pivoted fiber sampling with random-sample validation.
TTVector tt_cross(const TensorSampler& f, const std::vector<int>& shape, const CrossOptions& opts,
                  CrossReport* report = nullptr);

}  // namespace ttiga
