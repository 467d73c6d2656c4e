#include "exitsurv/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "exitsurv/rng.hpp"
#include "exitsurv/toml.hpp"

namespace exitsurv {

namespace {

void validate(const SectorSpec& spec) {
  if (spec.sector < 1 || spec.sector > 9)
    throw std::invalid_argument("synthgen: sector must be 1..9");
  if (spec.n_companies < 1)
    throw std::invalid_argument("synthgen: need at least one company");
  if (!(spec.sigma > 0.0) || !(spec.m1 > 0.0) || !(spec.m2 > 0.0))
    throw std::invalid_argument("synthgen: scale and shapes must be positive");
  if (spec.investor_pool < 1)
    throw std::invalid_argument("synthgen: empty investor pool");
  if (!(spec.foundation_start <= spec.foundation_end) ||
      !(spec.foundation_end < spec.study_end))
    throw std::invalid_argument("synthgen: date window out of order");
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

// Discrete power law over pool indices 1..P with weight i^-gamma.
struct ParticipationLaw {
  std::vector<double> cumulative;

  ParticipationLaw(long pool, double gamma) {
    cumulative.resize(static_cast<size_t>(pool));
    double total = 0.0;
    for (long i = 0; i < pool; ++i) {
      total += std::pow(static_cast<double>(i + 1), -gamma);
      cumulative[static_cast<size_t>(i)] = total;
    }
  }

  long draw(Rng& rng) const {
    double u = rng.uniform01() * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    return static_cast<long>(it - cumulative.begin());  // 0-based index
  }
};

double positive_uniform(Rng& rng) {
  double u;
  do {
    u = rng.uniform01();
  } while (u == 0.0);
  return u;
}

SectorTruth generate_into(const SectorSpec& spec, std::uint64_t seed,
                          Dataset& out, const std::string& investor_prefix) {
  validate(spec);
  Rng rng(seed);
  ParticipationLaw law(spec.investor_pool, spec.participation_exponent);
  long n = spec.n_companies;

  // First pass: lay down dates, rounds and investors.
  std::vector<CompanyRecord> companies(static_cast<size_t>(n));
  std::int64_t window =
      days_between(spec.foundation_start, spec.foundation_end) + 1;
  for (long i = 0; i < n; ++i) {
    CompanyRecord& c = companies[static_cast<size_t>(i)];
    c.company_id = "s" + std::to_string(spec.sector) + "-" + std::to_string(i + 1);
    c.sector = spec.sector;
    c.foundation_date = add_days(
        spec.foundation_start,
        static_cast<std::int64_t>(rng.uniform_int(static_cast<size_t>(window))));
    int n_rounds = 1 + static_cast<int>(rng.uniform_int(3));
    Date prev = c.foundation_date;
    for (int r = 0; r < n_rounds; ++r) {
      RoundRecord round;
      round.round_date =
          add_days(prev, 30 + static_cast<std::int64_t>(rng.uniform_int(330)));
      prev = round.round_date;
      int n_inv = 1 + static_cast<int>(rng.uniform_int(5));
      for (int v = 0; v < n_inv; ++v)
        round.investor_names.push_back(
            investor_prefix + std::to_string(law.draw(rng) + 1));
      if (r < 2) round.vix = 10.0 + 30.0 * rng.uniform01();
      c.rounds.push_back(std::move(round));
    }
  }

  // Second pass: the same features the pipeline would compute, z-scored
  // against this sample so the spec coefficients mean what they say.
  Dataset ranking;
  ranking.companies = companies;
  RankTable ranks = compute_investor_ranks(ranking);
  std::vector<FeatureVector> features(static_cast<size_t>(n));
  for (long i = 0; i < n; ++i)
    features[static_cast<size_t>(i)] =
        build_features(companies[static_cast<size_t>(i)], ranks);

  SectorTruth truth;
  truth.spec = spec;
  truth.feature_mean.assign(kNumFeatures, 0.0);
  truth.feature_sd.assign(kNumFeatures, 0.0);
  for (int j = 0; j < kNumFeatures; ++j) {
    double m = 0.0;
    for (long i = 0; i < n; ++i) m += features[static_cast<size_t>(i)][static_cast<size_t>(j)];
    m /= static_cast<double>(n);
    double v = 0.0;
    for (long i = 0; i < n; ++i) {
      double d = features[static_cast<size_t>(i)][static_cast<size_t>(j)] - m;
      v += d * d;
    }
    truth.feature_mean[static_cast<size_t>(j)] = m;
    truth.feature_sd[static_cast<size_t>(j)] = std::sqrt(v / static_cast<double>(n));
  }

  // Third pass: latent IPO time by inverse CDF, independent BA label.
  ErrorLaw error{spec.family, spec.m1, spec.m2};
  double sigma = spec.family == Family::Exponential ? 1.0 : spec.sigma;
  for (long i = 0; i < n; ++i) {
    double eta = spec.a0;
    double ba_logit = spec.ba_intercept;
    for (int j = 0; j < kNumFeatures; ++j) {
      double sd = truth.feature_sd[static_cast<size_t>(j)];
      if (!(sd > 0.0)) continue;  // constant feature carries no signal
      double z = (features[static_cast<size_t>(i)][static_cast<size_t>(j)] -
                  truth.feature_mean[static_cast<size_t>(j)]) /
                 sd;
      eta += spec.coefficients[static_cast<size_t>(j)] * z;
      ba_logit += spec.ba_coefficients[static_cast<size_t>(j)] * z;
    }
    truth.eta.push_back(eta);
    double p_ba = sigmoid(ba_logit);
    truth.p_ba.push_back(p_ba);

    CompanyRecord& c = companies[static_cast<size_t>(i)];
    bool is_ba = rng.uniform01() < p_ba;
    double t_latent =
        quantile(TimeLaw(error, eta, sigma), positive_uniform(rng));
    bool coin = rng.uniform01() < 0.5;  // consumed either way: keeps the
                                        // draw sequence aligned across specs
    if (is_ba) {
      c.status = coin ? Status::Bankrupt : Status::Acquisition;
    } else {
      std::int64_t ipo_days =
          std::max<std::int64_t>(1, std::llround(t_latent * kDaysPerYear));
      Date ipo = add_days(c.foundation_date, ipo_days);
      if (ipo <= spec.study_end) {
        c.status = Status::IPO;
        c.ipo_date = ipo;
      } else {
        c.status = Status::Private;
      }
    }
  }

  for (auto& c : companies) out.companies.push_back(std::move(c));
  out.provenance.rows_read += n;
  return truth;
}

}  // namespace

SynthResult generate_sector(const SectorSpec& spec, std::uint64_t seed) {
  SynthResult result;
  result.data.provenance.source = "synthetic";
  std::string prefix = "s" + std::to_string(spec.sector) + "_inv";
  result.truth.push_back(generate_into(spec, seed, result.data, prefix));
  return result;
}

SynthResult generate_study(const std::vector<SectorSpec>& specs,
                           std::uint64_t seed, bool shared_investor_pool) {
  std::set<int> ids;
  for (const auto& s : specs)
    if (!ids.insert(s.sector).second)
      throw std::invalid_argument("generate_study: duplicate sector id " +
                                  std::to_string(s.sector));
  SynthResult result;
  result.data.provenance.source = "synthetic";
  for (size_t i = 0; i < specs.size(); ++i) {
    std::string prefix = shared_investor_pool
                             ? "inv"
                             : "s" + std::to_string(specs[i].sector) + "_inv";
    result.truth.push_back(generate_into(
        specs[i], derive_seed(seed, static_cast<std::uint64_t>(i)),
        result.data, prefix));
  }
  return result;
}

nlohmann::json truth_to_json(const SynthResult& result) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["sectors"] = nlohmann::json::array();
  for (const auto& t : result.truth) {
    const SectorSpec& s = t.spec;
    nlohmann::json js;
    js["sector"] = s.sector;
    js["n_companies"] = s.n_companies;
    js["family"] = family_name(s.family);
    js["a0"] = s.a0;
    js["coefficients"] = s.coefficients;
    js["sigma"] = s.sigma;
    js["m1"] = s.m1;
    js["m2"] = s.m2;
    js["ba_intercept"] = s.ba_intercept;
    js["ba_coefficients"] = s.ba_coefficients;
    js["investor_pool"] = s.investor_pool;
    js["participation_exponent"] = s.participation_exponent;
    js["foundation_start"] = format_date(s.foundation_start);
    js["foundation_end"] = format_date(s.foundation_end);
    js["study_end"] = format_date(s.study_end);
    js["feature_mean"] = t.feature_mean;
    js["feature_sd"] = t.feature_sd;
    js["eta"] = t.eta;
    js["p_ba"] = t.p_ba;
    j["sectors"].push_back(js);
  }
  return j;
}

void save_truth(const SynthResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out << truth_to_json(result).dump(2) << '\n';
}

namespace {

int feature_index(const TomlValue::Scalar& s) {
  if (const auto* name = std::get_if<std::string>(&s)) {
    for (int j = 0; j < kNumFeatures; ++j)
      if (*name == kFeatureNames[j]) return j;
    throw std::invalid_argument("synth config: unknown feature '" + *name + "'");
  }
  int j = -1;
  if (const auto* i = std::get_if<std::int64_t>(&s)) j = static_cast<int>(*i);
  if (const auto* d = std::get_if<double>(&s)) j = static_cast<int>(*d);
  if (j < 0 || j >= kNumFeatures)
    throw std::invalid_argument("synth config: feature index out of range");
  return j;
}

// `active` names (or indexes) the nonzero coefficients listed in `values`.
void apply_sparse(const TomlTable& t, const std::string& prefix,
                  const std::string& idx_key, const std::string& val_key,
                  std::array<double, kNumFeatures>& out) {
  std::vector<TomlValue::Scalar> idx;
  std::vector<double> val;
  if (t.has(prefix + idx_key)) idx = t.values.at(prefix + idx_key).array;
  if (t.has(prefix + val_key)) val = t.get_double_array(prefix + val_key);
  if (idx.size() != val.size())
    throw std::invalid_argument("synth config: " + idx_key + " and " + val_key +
                                " must have equal lengths");
  for (size_t i = 0; i < idx.size(); ++i)
    out[static_cast<size_t>(feature_index(idx[i]))] = val[i];
}

}  // namespace

StudySpec study_spec_from_toml(const TomlTable& toml) {
  StudySpec study;
  study.seed = static_cast<std::uint64_t>(toml.get_int("seed", 0));
  study.shared_investor_pool = toml.get_bool("shared_investor_pool", false);
  auto it = toml.lists.find("sector");
  if (it == toml.lists.end() || it->second.empty())
    throw std::invalid_argument("synth config: no [[sector]] blocks");
  for (const auto& t : it->second) {
    SectorSpec s;
    s.sector = static_cast<int>(t.get_int("id", 0));
    s.n_companies = t.get_int("n", 1000);
    s.family = family_from_name(t.get_string("family", "weibull"));
    s.a0 = t.get_double("a0", s.a0);
    s.sigma = t.get_double("sigma", s.sigma);
    s.m1 = t.get_double("m1", s.m1);
    s.m2 = t.get_double("m2", s.m2);
    s.ba_intercept = t.get_double("ba_intercept", s.ba_intercept);
    apply_sparse(t, "", "active", "values", s.coefficients);
    apply_sparse(t, "", "ba_active", "ba_values", s.ba_coefficients);
    s.investor_pool = t.get_int("investor_pool", s.investor_pool);
    s.participation_exponent =
        t.get_double("participation_exponent", s.participation_exponent);
    s.foundation_start = t.get_date("foundation_start", s.foundation_start);
    s.foundation_end = t.get_date("foundation_end", s.foundation_end);
    s.study_end = t.get_date("study_end", s.study_end);
    study.sectors.push_back(s);
  }
  return study;
}

}  // namespace exitsurv
