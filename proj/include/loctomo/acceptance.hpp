#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "loctomo/net.hpp"

namespace loctomo {

// Model and training budget for the learned criteria (7-9). The defaults
// are a desk-scale stand-in for the full-size network so that the whole
// suite fits a single CPU core.
struct AcceptanceScale {
  int volume = 64;
  int train_phantoms = 8;
  int patch_size = 11;
  int feature_dim = 16;
  int hidden = 64;
  int depth = 2;
  int pe_dim = 32;
  int batch_size = 32;
  long steps = 6000;
  double lr = 1e-3;
  double target_fbp_pearson = 0.5;

  NetConfig net(int out_dim) const;
};

struct AcceptanceOptions {
  std::uint64_t seed = 20240601;
  std::vector<int> criteria;  // empty = all
  AcceptanceScale scale;
  std::ostream* log = nullptr;  // progress lines
};

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

// Runs the selected criteria in order. `on_result` fires as each finishes.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options,
                                            const std::function<void(const CriterionResult&)>& on_result = {});

std::string format_result(const CriterionResult& r);

}  // namespace loctomo
