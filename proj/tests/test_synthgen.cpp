#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "exitsurv/aft.hpp"
#include "exitsurv/data.hpp"
#include "exitsurv/dates.hpp"
#include "exitsurv/distributions.hpp"
#include "exitsurv/kaplan_meier.hpp"
#include "exitsurv/synthgen.hpp"
#include "exitsurv/toml.hpp"

using namespace exitsurv;

namespace {

SectorSpec base_spec() {
  SectorSpec s;
  s.sector = 1;
  s.n_companies = 500;
  s.family = Family::Weibull;
  s.a0 = 1.0;
  s.sigma = 0.5;
  return s;
}

std::string csv_bytes(const Dataset& d) {
  std::ostringstream out;
  write_dataset_csv(d, out);
  return out.str();
}

}  // namespace

TEST_CASE("a no-ba spec with a distant study end produces only ipo events") {
  SectorSpec spec = base_spec();
  spec.study_end = make_date(2200, 12, 31);
  SynthResult r = generate_sector(spec, 7);
  REQUIRE(r.data.companies.size() == 500);
  for (const auto& c : r.data.companies) {
    CHECK(c.status == Status::IPO);
    CHECK(c.ipo_date.has_value());
  }
}

TEST_CASE("certain ba leaves nothing for the conditional model") {
  SectorSpec spec = base_spec();
  spec.ba_intercept = 1e9;
  SynthResult r = generate_sector(spec, 7);
  long bankrupt = 0, acquired = 0;
  for (const auto& c : r.data.companies) {
    CHECK_FALSE(c.ipo_date.has_value());
    if (c.status == Status::Bankrupt) ++bankrupt;
    if (c.status == Status::Acquisition) ++acquired;
  }
  CHECK(bankrupt + acquired == 500);
  CHECK(bankrupt > 150);  // labels split roughly half and half
  CHECK(acquired > 150);
  Dataset f = filter_conditional(r.data);
  CHECK(f.companies.empty());
}

TEST_CASE("weibull ground truth is recovered from a large sample") {
  SectorSpec spec = base_spec();
  spec.n_companies = 5000;
  spec.coefficients[0] = -0.3;  // acts on the z-scored feature
  spec.foundation_start = make_date(2012, 1, 1);
  spec.foundation_end = make_date(2016, 12, 31);
  SynthResult r = generate_sector(spec, 21);

  RankTable ranks = compute_investor_ranks(r.data);
  std::vector<AftRecord> records;
  long censored = 0;
  for (const auto& c : r.data.companies) {
    SurvivalRecord s = build_survival_record(c, spec.study_end);
    censored += s.event ? 0 : 1;
    records.push_back({s, build_features(c, ranks)});
  }
  const double cens_frac = static_cast<double>(censored) / 5000.0;
  CHECK(cens_frac > 0.10);
  CHECK(cens_frac < 0.35);

  AftOptions opt;
  opt.columns = std::vector<int>{0};
  AftFit fit = fit_aft(Family::Weibull, records, opt);
  CHECK(std::fabs(fit.intercept - spec.a0) / spec.a0 < 0.05);
  CHECK(std::fabs(fit.coefficients[0] - spec.coefficients[0]) / 0.3 < 0.05);
  CHECK(std::fabs(fit.scale - spec.sigma) / spec.sigma < 0.05);
}

TEST_CASE("empirical censoring matches the analytic fraction") {
  SectorSpec spec = base_spec();
  spec.n_companies = 6000;
  spec.foundation_start = make_date(2012, 1, 1);
  spec.foundation_end = make_date(2016, 12, 31);
  SynthResult r = generate_sector(spec, 33);

  // P(T > horizon) averaged over the uniform foundation-day window
  const TimeLaw law({spec.family}, spec.a0, spec.sigma);
  const long window = days_between(spec.foundation_start, spec.foundation_end);
  double analytic = 0.0;
  for (long d = 0; d <= window; ++d) {
    const Date f = add_days(spec.foundation_start, d);
    const double horizon = years_between(f, spec.study_end);
    analytic += survival(law, horizon);
  }
  analytic /= static_cast<double>(window + 1);

  long censored = 0;
  for (const auto& c : r.data.companies)
    if (c.status == Status::Private) ++censored;
  const double empirical = static_cast<double>(censored) / 6000.0;
  CHECK(std::fabs(empirical - analytic) < 0.02);
}

TEST_CASE("km on a covariate-free sample tracks the true curve") {
  SectorSpec spec = base_spec();
  spec.n_companies = 10000;
  spec.foundation_start = make_date(2010, 1, 1);
  spec.foundation_end = make_date(2014, 12, 31);
  SynthResult r = generate_sector(spec, 44);

  std::vector<SurvivalRecord> records;
  for (const auto& c : r.data.companies)
    records.push_back(build_survival_record(c, spec.study_end));
  KmCurve km = km_fit(records);
  const TimeLaw law({spec.family}, spec.a0, spec.sigma);
  double sup = 0.0;
  for (size_t k = 0; k < km.event_times.size(); ++k)
    sup = std::max(sup,
                   std::fabs(km.estimates[k] - survival(law, km.event_times[k])));
  CHECK(sup < 0.03);
}

TEST_CASE("generated features respect the rank-statistic ordering") {
  SectorSpec spec = base_spec();
  spec.n_companies = 300;
  SynthResult r = generate_sector(spec, 5);
  RankTable ranks = compute_investor_ranks(r.data);
  for (const auto& c : r.data.companies) {
    FeatureVector f = build_features(c, ranks);
    for (int round = 0; round < 3; ++round) {
      const double avg = f[static_cast<size_t>(4 * round)];
      const double mx = f[static_cast<size_t>(4 * round + 1)];
      const double mn = f[static_cast<size_t>(4 * round + 2)];
      CHECK(mn <= avg + 1e-12);
      CHECK(avg <= mx + 1e-12);
    }
    CHECK(f[3] >= 1.0);  // a company always has a first round
  }
}

TEST_CASE("a study is the seed-deterministic union of its sectors") {
  std::vector<SectorSpec> specs;
  for (int s = 1; s <= 3; ++s) {
    SectorSpec spec = base_spec();
    spec.sector = s;
    spec.n_companies = 200;
    specs.push_back(spec);
  }
  SynthResult a = generate_study(specs, 99);
  SynthResult b = generate_study(specs, 99);
  SynthResult c = generate_study(specs, 100);
  REQUIRE(a.data.companies.size() == 600);
  REQUIRE(a.truth.size() == 3);
  std::set<int> sectors;
  for (const auto& comp : a.data.companies) sectors.insert(comp.sector);
  CHECK(sectors == std::set<int>{1, 2, 3});
  CHECK(csv_bytes(a.data) == csv_bytes(b.data));
  CHECK(csv_bytes(a.data) != csv_bytes(c.data));
}

TEST_CASE("duplicate sector ids are rejected") {
  std::vector<SectorSpec> specs = {base_spec(), base_spec()};
  CHECK_THROWS_AS(generate_study(specs, 1), std::invalid_argument);
}

TEST_CASE("investor pools are per-sector unless shared") {
  std::vector<SectorSpec> specs;
  for (int s = 1; s <= 2; ++s) {
    SectorSpec spec = base_spec();
    spec.sector = s;
    spec.n_companies = 200;
    spec.investor_pool = 40;
    specs.push_back(spec);
  }
  auto names_by_sector = [](const Dataset& d) {
    std::map<int, std::set<std::string>> by;
    for (const auto& c : d.companies)
      for (const auto& r : c.rounds)
        for (const auto& n : r.investor_names) by[c.sector].insert(n);
    return by;
  };

  SynthResult split = generate_study(specs, 11, false);
  auto by = names_by_sector(split.data);
  std::vector<std::string> common;
  std::set_intersection(by[1].begin(), by[1].end(), by[2].begin(), by[2].end(),
                        std::back_inserter(common));
  CHECK(common.empty());

  SynthResult shared = generate_study(specs, 11, true);
  by = names_by_sector(shared.data);
  common.clear();
  std::set_intersection(by[1].begin(), by[1].end(), by[2].begin(), by[2].end(),
                        std::back_inserter(common));
  CHECK_FALSE(common.empty());
}

TEST_CASE("truth sidecar echoes the spec and latent draws") {
  SectorSpec spec = base_spec();
  spec.n_companies = 50;
  spec.coefficients[2] = 0.4;
  SynthResult r = generate_sector(spec, 3);
  nlohmann::json j = truth_to_json(r);
  REQUIRE(j.contains("sectors"));
  REQUIRE(j["sectors"].size() == 1);
  const auto& sec = j["sectors"][0];
  CHECK(sec["sector"] == 1);
  CHECK(sec["family"] == "weibull");
  CHECK(sec["a0"] == 1.0);
  CHECK(sec["coefficients"][2] == 0.4);
  CHECK(sec["eta"].size() == 50);
  CHECK(sec["p_ba"].size() == 50);
  CHECK(sec["feature_mean"].size() == static_cast<size_t>(kNumFeatures));
}

TEST_CASE("study specs parse from toml blocks") {
  const std::string in = R"(
seed = 77
shared_investor_pool = true

[[sector]]
id = 1
n = 400
family = "lognormal"
a0 = 1.2
sigma = 0.6
active = ["avg_rank_1", 13]
values = [-0.4, 0.25]
ba_intercept = -2.0
ba_active = ["n_investors_1"]
ba_values = [0.5]
investor_pool = 80
participation_exponent = 1.4
foundation_start = 2005-06-01
foundation_end = 2015-06-01
study_end = 2019-12-31

[[sector]]
id = 2
family = "generalized_f"
m1 = 2.0
m2 = 3.0
)";
  TomlTable toml = parse_toml(in);
  StudySpec study = study_spec_from_toml(toml);
  CHECK(study.seed == 77);
  CHECK(study.shared_investor_pool);
  REQUIRE(study.sectors.size() == 2);

  const SectorSpec& a = study.sectors[0];
  CHECK(a.sector == 1);
  CHECK(a.n_companies == 400);
  CHECK(a.family == Family::LogNormal);
  CHECK(a.a0 == 1.2);
  CHECK(a.sigma == 0.6);
  CHECK(a.coefficients[0] == -0.4);   // avg_rank_1 by name
  CHECK(a.coefficients[13] == 0.25);  // vix_2 by index
  CHECK(a.ba_intercept == -2.0);
  CHECK(a.ba_coefficients[3] == 0.5);
  CHECK(a.investor_pool == 80);
  CHECK(a.participation_exponent == 1.4);
  CHECK(a.foundation_start == make_date(2005, 6, 1));
  CHECK(a.study_end == make_date(2019, 12, 31));

  const SectorSpec& b = study.sectors[1];
  CHECK(b.sector == 2);
  CHECK(b.family == Family::GeneralizedF);
  CHECK(b.m1 == 2.0);
  CHECK(b.m2 == 3.0);
}

TEST_CASE("mismatched sparse coefficient arrays are rejected") {
  const std::string in = R"(
[[sector]]
id = 1
active = [0, 1]
values = [0.5]
)";
  TomlTable toml = parse_toml(in);
  CHECK_THROWS_AS(study_spec_from_toml(toml), std::invalid_argument);
}
