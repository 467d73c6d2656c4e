#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "exitsurv/data.hpp"
#include "exitsurv/distributions.hpp"

#include "json.hpp"

namespace exitsurv {

// Ground-truth description of one synthetic sector. The survival and BA
// coefficients act on z-scored features (z-scored against the generated
// sample itself), so a fit on the same data estimates them directly.
struct SectorSpec {
  int sector = 1;
  long n_companies = 1000;

  Family family = Family::Weibull;
  double a0 = 1.5;  // intercept of the log-time regression
  std::array<double, kNumFeatures> coefficients{};
  double sigma = 0.5;
  double m1 = 1.0, m2 = 1.0;  // GeneralizedF only

  double ba_intercept = -1e9;  // logit of P(bankrupt/acquired); -1e9 ~ never
  std::array<double, kNumFeatures> ba_coefficients{};

  long investor_pool = 200;
  double participation_exponent = 1.2;  // power-law weight i^-gamma

  Date foundation_start = make_date(1998, 1, 1);
  Date foundation_end = make_date(2016, 12, 31);
  Date study_end = make_date(2018, 12, 31);
};

// Latent per-company quantities, aligned with the generation order of the
// sector's companies in the emitted dataset.
struct SectorTruth {
  SectorSpec spec;
  std::vector<double> feature_mean;  // z-scoring constants actually used
  std::vector<double> feature_sd;
  std::vector<double> eta;   // a0 + a'z per company
  std::vector<double> p_ba;  // BA probability per company
};

struct SynthResult {
  Dataset data;
  std::vector<SectorTruth> truth;
};

SynthResult generate_sector(const SectorSpec& spec, std::uint64_t seed);

// Sectors are generated independently with sub-seeds derived from the
// master seed and concatenated in spec order. With a shared pool, investor
// names are drawn from one global name space instead of per-sector ones.
SynthResult generate_study(const std::vector<SectorSpec>& specs,
                           std::uint64_t seed, bool shared_investor_pool = false);

nlohmann::json truth_to_json(const SynthResult& result);
void save_truth(const SynthResult& result, const std::string& path);

struct StudySpec {
  std::vector<SectorSpec> sectors;
  bool shared_investor_pool = false;
  std::uint64_t seed = 0;
};

// Reads [[sector]] blocks; sparse coefficients come as parallel `active`
// index and `values` arrays (same for `ba_active`/`ba_values`).
StudySpec study_spec_from_toml(const class TomlTable& toml);

}  // namespace exitsurv
