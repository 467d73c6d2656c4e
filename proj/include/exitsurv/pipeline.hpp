#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "exitsurv/aft.hpp"
#include "exitsurv/classifier.hpp"
#include "exitsurv/cox.hpp"
#include "exitsurv/data.hpp"
#include "exitsurv/kaplan_meier.hpp"
#include "exitsurv/toml.hpp"

#include "json.hpp"

namespace exitsurv {

struct PipelineConfig {
  Date study_end = make_date(2018, 12, 31);
  double holdout_fraction = 0.1;  // survival-stage split
  std::uint64_t split_seed = 42;
  TrainConfig classifier;
  double classifier_holdout_fraction = 1.0 / 3.0;  // internal to the classifier
  std::vector<Family> families = {Family::Exponential, Family::Weibull,
                                  Family::LogNormal, Family::GeneralizedF};
  double selection_slack = 0.02;  // coverage shortlist tolerance
  double wald_level = 0.10;
  TimeTransform pha_transform = TimeTransform::Km;
  std::string output_dir = "out";
};

PipelineConfig config_from_toml(const TomlTable& toml);
PipelineConfig load_pipeline_config(const std::string& path);

// Fraction of the reference curve's event times at which the mean fitted
// survival over the holdout subjects sits inside the 95% band.
double fit_quality(const AftFit& fit, const std::vector<FeatureVector>& holdout,
                   const KmCurve& km);

struct FamilyAttempt {
  Family family = Family::Weibull;
  bool ok = false;
  std::string error;  // when !ok
  double max_loglik = 0.0;
  int n_retained = 0;
  double km_coverage = 0.0;
};

struct SelectionRecord {
  std::vector<FamilyAttempt> attempts;
  Family chosen = Family::Weibull;
  std::string rationale;
};

struct SelectionResult {
  SelectionRecord record;
  AftFit fit;  // the chosen family's selected-covariate fit
};

// One selected-covariate fit per family, scored against the holdout
// reference curve: families within `slack` of the best coverage are
// shortlisted, the shortlist winner has the highest likelihood, ties go
// to fewer covariates and then to the fixed family order above.
SelectionResult select_model(const std::vector<AftRecord>& train,
                             const std::vector<FeatureVector>& holdout_features,
                             const KmCurve& holdout_km,
                             const std::vector<Family>& families,
                             double wald_level, double slack,
                             const AftOptions& options = {});

// Law of total probability with P(T <= t | bankrupt/acquired) = 1:
// P(T <= t) = 1 - s_cond * p_v.
double marginal_probability(double s_cond, double p_v);

struct SectorCurve {
  std::vector<double> t;  // holdout event times
  std::vector<double> km_s, km_lower, km_upper;
  std::vector<long> n_risk, n_event;
  std::vector<double> aft_cond;    // mean conditional survival
  std::vector<double> aft_uncond;  // aft_cond * mean p_v
  double p_v_mean = 1.0;
};

struct SectorReport {
  int sector = 0;
  bool ok = false;
  std::string error;  // when !ok

  bool pha_ok = false;
  std::string pha_error;
  PhaReport pha;
  std::vector<std::string> pha_covariates;

  SelectionRecord selection;
  AftFit fit;
  KmCurve km_train;
  SectorCurve curve;

  long n_train = 0, n_train_conditional = 0;
  long n_holdout = 0, n_holdout_conditional = 0;
  std::map<std::string, long> drops;
};

struct Report {
  bool partial = false;
  nlohmann::json config_echo;
  Provenance provenance;
  MetricsReport classifier_metrics;
  TrainConfig classifier_config;
  std::vector<SectorReport> sectors;
};

Report run_pipeline(const Dataset& data, const PipelineConfig& config);

nlohmann::json report_to_json(const Report& report);
Report report_from_json(const nlohmann::json& j);
void save_report(const Report& report, const std::string& path);
Report load_report(const std::string& path);

enum class CurveFormat { Csv, Svg };

// Writes one merged curve table (and/or plot) per completed sector plus a
// manifest naming the files and the skipped sectors.
std::vector<std::string> emit_curves(const Report& report,
                                     const std::string& out_dir,
                                     CurveFormat format);

// 64-bit FNV-1a, used for the run manifest's input hashes.
std::uint64_t fnv1a64(const std::string& bytes);
std::string hash_file(const std::string& path);  // hex digest

void write_manifest(const std::string& out_dir,
                    const std::map<std::string, std::string>& inputs,
                    const std::map<std::string, std::uint64_t>& seeds);

}  // namespace exitsurv
