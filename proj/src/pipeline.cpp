#include "exitsurv/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <set>
#include <sstream>
#include <stdexcept>

#include "exitsurv/rng.hpp"

namespace exitsurv {

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::string fmt_g(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["epsilon"] = c.epsilon;
  j["batch_size"] = c.batch_size;
  j["hidden"] = c.hidden;
  j["seed"] = c.seed;
  j["smote_k"] = c.smote_k;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.epsilon = j.at("epsilon").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.smote_k = j.at("smote_k").get<int>();
  return c;
}

MetricsReport metrics_from_json(const nlohmann::json& j) {
  MetricsReport m;
  m.precision_pos = j.at("precision_pos").get<double>();
  m.recall_pos = j.at("recall_pos").get<double>();
  m.precision_neg = j.at("precision_neg").get<double>();
  m.recall_neg = j.at("recall_neg").get<double>();
  m.accuracy = j.at("accuracy").get<double>();
  const auto& c = j.at("confusion");
  m.tp = c.at("tp").get<long>();
  m.fp = c.at("fp").get<long>();
  m.fn = c.at("fn").get<long>();
  m.tn = c.at("tn").get<long>();
  m.precision_pos_defined = true;
  m.recall_pos_defined = true;
  m.precision_neg_defined = true;
  m.recall_neg_defined = true;
  for (const auto& name : j.at("undefined")) {
    const std::string s = name.get<std::string>();
    if (s == "precision_pos") m.precision_pos_defined = false;
    if (s == "recall_pos") m.recall_pos_defined = false;
    if (s == "precision_neg") m.precision_neg_defined = false;
    if (s == "recall_neg") m.recall_neg_defined = false;
  }
  return m;
}

nlohmann::json km_to_json(const KmCurve& k) {
  nlohmann::json j;
  j["t"] = k.event_times;
  j["s"] = k.estimates;
  j["lower"] = k.lower;
  j["upper"] = k.upper;
  j["n_risk"] = k.at_risk;
  j["n_event"] = k.deaths;
  return j;
}

KmCurve km_from_json(const nlohmann::json& j) {
  KmCurve k;
  k.event_times = j.at("t").get<std::vector<double>>();
  k.estimates = j.at("s").get<std::vector<double>>();
  k.lower = j.at("lower").get<std::vector<double>>();
  k.upper = j.at("upper").get<std::vector<double>>();
  k.at_risk = j.at("n_risk").get<std::vector<long>>();
  k.deaths = j.at("n_event").get<std::vector<long>>();
  return k;
}

nlohmann::json config_to_json(const PipelineConfig& c) {
  nlohmann::json j;
  j["study_end"] = format_date(c.study_end);
  j["split"] = {{"holdout_fraction", c.holdout_fraction}, {"seed", c.split_seed}};
  j["classifier"] = train_config_to_json(c.classifier);
  j["classifier"]["holdout_fraction"] = c.classifier_holdout_fraction;
  nlohmann::json fams = nlohmann::json::array();
  for (Family f : c.families) fams.push_back(family_name(f));
  j["selection"] = {{"families", fams},
                    {"slack", c.selection_slack},
                    {"level", c.wald_level}};
  j["pha"] = {{"transform", c.pha_transform == TimeTransform::Km ? "km" : "identity"}};
  j["output"] = {{"dir", c.output_dir}};
  return j;
}

int family_order(Family f) { return static_cast<int>(f); }

bool in_unit_interval(double x) { return x > 0.0 && x < 1.0; }

}  // namespace

PipelineConfig config_from_toml(const TomlTable& toml) {
  PipelineConfig cfg;
  cfg.study_end = toml.get_date("study_end", cfg.study_end);
  cfg.holdout_fraction = toml.get_double("split.holdout_fraction", cfg.holdout_fraction);
  cfg.split_seed = static_cast<std::uint64_t>(toml.get_int("split.seed", 42));

  TrainConfig& c = cfg.classifier;
  c.epochs = static_cast<int>(toml.get_int("classifier.epochs", c.epochs));
  c.learning_rate = toml.get_double("classifier.learning_rate", c.learning_rate);
  c.beta1 = toml.get_double("classifier.beta1", c.beta1);
  c.beta2 = toml.get_double("classifier.beta2", c.beta2);
  c.epsilon = toml.get_double("classifier.epsilon", c.epsilon);
  c.batch_size = static_cast<int>(toml.get_int("classifier.batch_size", c.batch_size));
  c.hidden = static_cast<int>(toml.get_int("classifier.hidden", c.hidden));
  c.seed = static_cast<std::uint64_t>(toml.get_int("classifier.seed", 0));
  c.smote_k = static_cast<int>(toml.get_int("classifier.smote_k", c.smote_k));
  cfg.classifier_holdout_fraction =
      toml.get_double("classifier.holdout_fraction", cfg.classifier_holdout_fraction);

  if (toml.has("selection.families")) {
    cfg.families.clear();
    for (const auto& name : toml.get_string_array("selection.families"))
      cfg.families.push_back(family_from_name(name));
  }
  cfg.selection_slack = toml.get_double("selection.slack", cfg.selection_slack);
  cfg.wald_level = toml.get_double("selection.level", cfg.wald_level);

  const std::string transform = toml.get_string("pha.transform", "km");
  if (transform == "km")
    cfg.pha_transform = TimeTransform::Km;
  else if (transform == "identity")
    cfg.pha_transform = TimeTransform::Identity;
  else
    throw std::invalid_argument("config: unknown pha.transform '" + transform + "'");

  cfg.output_dir = toml.get_string("output.dir", cfg.output_dir);

  if (!in_unit_interval(cfg.holdout_fraction))
    throw std::invalid_argument("config: split.holdout_fraction must lie in (0, 1)");
  if (!in_unit_interval(cfg.classifier_holdout_fraction))
    throw std::invalid_argument("config: classifier.holdout_fraction must lie in (0, 1)");
  if (cfg.families.empty())
    throw std::invalid_argument("config: selection.families must not be empty");
  if (cfg.selection_slack < 0.0)
    throw std::invalid_argument("config: selection.slack must be non-negative");
  if (!in_unit_interval(cfg.wald_level))
    throw std::invalid_argument("config: selection.level must lie in (0, 1)");
  return cfg;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  return config_from_toml(parse_toml_file(path));
}

double fit_quality(const AftFit& fit, const std::vector<FeatureVector>& holdout,
                   const KmCurve& km) {
  if (km.event_times.empty())
    throw std::invalid_argument("fit_quality: reference curve has no events");
  if (holdout.empty())
    throw std::invalid_argument("fit_quality: no holdout subjects");
  long inside = 0;
  for (size_t i = 0; i < km.event_times.size(); ++i) {
    double mean = 0.0;
    for (const FeatureVector& x : holdout)
      mean += conditional_survival(fit, x, km.event_times[i]);
    mean /= static_cast<double>(holdout.size());
    if (mean >= km.lower[i] && mean <= km.upper[i]) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(km.event_times.size());
}

SelectionResult select_model(const std::vector<AftRecord>& train,
                             const std::vector<FeatureVector>& holdout_features,
                             const KmCurve& holdout_km,
                             const std::vector<Family>& families,
                             double wald_level, double slack,
                             const AftOptions& options) {
  if (families.empty())
    throw std::invalid_argument("select_model: no candidate families");

  SelectionResult result;
  std::vector<AftFit> fits(families.size());
  std::ostringstream log;
  for (size_t i = 0; i < families.size(); ++i) {
    FamilyAttempt at;
    at.family = families[i];
    try {
      fits[i] = select_covariates(families[i], train, wald_level, options);
      at.max_loglik = fits[i].max_loglik;
      at.n_retained = static_cast<int>(fits[i].retained.size());
      at.km_coverage = fit_quality(fits[i], holdout_features, holdout_km);
      at.ok = true;
    } catch (const std::exception& e) {
      at.error = e.what();
    }
    if (i > 0) log << "; ";
    log << family_name(at.family) << ": ";
    if (at.ok)
      log << "log-likelihood=" << fmt_g(at.max_loglik) << ", retained="
          << at.n_retained << ", coverage=" << fmt_g(at.km_coverage);
    else
      log << "failed (" << at.error << ")";
    result.record.attempts.push_back(at);
  }

  double best_cov = -1.0;
  for (const FamilyAttempt& at : result.record.attempts)
    if (at.ok) best_cov = std::max(best_cov, at.km_coverage);
  if (best_cov < 0.0)
    throw std::runtime_error("select_model: no family converged: " + log.str());

  std::vector<size_t> shortlist;
  double max_abs_ll = 1.0;
  for (size_t i = 0; i < result.record.attempts.size(); ++i) {
    const FamilyAttempt& at = result.record.attempts[i];
    if (at.ok && at.km_coverage >= best_cov - slack) {
      shortlist.push_back(i);
      max_abs_ll = std::max(max_abs_ll, std::fabs(at.max_loglik));
    }
  }
  const double tol = 1e-9 * max_abs_ll;

  // Highest likelihood wins; near-ties go to the sparser model, then to
  // the fixed family order.
  auto better = [&](const FamilyAttempt& a, const FamilyAttempt& b) {
    if (a.max_loglik > b.max_loglik + tol) return true;
    if (b.max_loglik > a.max_loglik + tol) return false;
    if (a.n_retained != b.n_retained) return a.n_retained < b.n_retained;
    return family_order(a.family) < family_order(b.family);
  };
  size_t win = shortlist[0];
  for (size_t j = 1; j < shortlist.size(); ++j)
    if (better(result.record.attempts[shortlist[j]], result.record.attempts[win]))
      win = shortlist[j];

  bool tie = false;
  for (size_t i : shortlist)
    if (i != win &&
        std::fabs(result.record.attempts[i].max_loglik -
                  result.record.attempts[win].max_loglik) <= tol)
      tie = true;

  log << " | best coverage " << fmt_g(best_cov) << "; shortlist:";
  for (size_t j = 0; j < shortlist.size(); ++j)
    log << (j == 0 ? " " : ", ")
        << family_name(result.record.attempts[shortlist[j]].family);
  log << "; chosen " << family_name(result.record.attempts[win].family)
      << (tie ? " (likelihood tie broken toward fewer covariates, then family order)"
              : " (highest log-likelihood on the shortlist)");

  result.record.chosen = result.record.attempts[win].family;
  result.record.rationale = log.str();
  result.fit = fits[win];
  return result;
}

double marginal_probability(double s_cond, double p_v) {
  if (!(s_cond >= 0.0 && s_cond <= 1.0))
    throw std::invalid_argument("marginal_probability: survival outside [0, 1]");
  if (!(p_v >= 0.0 && p_v <= 1.0))
    throw std::invalid_argument("marginal_probability: p_v outside [0, 1]");
  return 1.0 - s_cond * p_v;
}

namespace {

bool is_conditional(const CompanyRecord& c) {
  return c.status == Status::IPO || c.status == Status::Private;
}

bool is_positive_label(const CompanyRecord& c) {
  return c.status == Status::Bankrupt || c.status == Status::Acquisition;
}

SectorReport run_sector(int sector, const Dataset& train, const Dataset& holdout,
                        const RankTable& ranks, const MlpModel& model,
                        const PipelineConfig& cfg) {
  SectorReport rep;
  rep.sector = sector;
  try {
    std::vector<const CompanyRecord*> tr, ho;
    for (const CompanyRecord& c : train.companies)
      if (c.sector == sector) tr.push_back(&c);
    for (const CompanyRecord& c : holdout.companies)
      if (c.sector == sector) ho.push_back(&c);
    rep.n_train = static_cast<long>(tr.size());
    rep.n_holdout = static_cast<long>(ho.size());

    // Conditional (IPO'd or still-private) subjects carry the durations.
    std::vector<AftRecord> cond_train;
    for (const CompanyRecord* c : tr) {
      if (!is_conditional(*c)) continue;
      try {
        SurvivalRecord s = build_survival_record(*c, cfg.study_end);
        cond_train.push_back({s, build_features(*c, ranks)});
      } catch (const std::exception&) {
        ++rep.drops["train_non_positive_duration"];
      }
    }
    std::vector<AftRecord> cond_holdout;
    for (const CompanyRecord* c : ho) {
      if (!is_conditional(*c)) continue;
      try {
        SurvivalRecord s = build_survival_record(*c, cfg.study_end);
        cond_holdout.push_back({s, build_features(*c, ranks)});
      } catch (const std::exception&) {
        ++rep.drops["holdout_non_positive_duration"];
      }
    }
    rep.n_train_conditional = static_cast<long>(cond_train.size());
    rep.n_holdout_conditional = static_cast<long>(cond_holdout.size());
    if (cond_train.empty())
      throw std::runtime_error("no conditional training records");
    if (cond_holdout.empty())
      throw std::runtime_error("no conditional holdout records");

    // Constant covariate columns carry no information and break the
    // z-scoring, so they are removed up front.
    std::vector<int> columns;
    for (int j = 0; j < kNumFeatures; ++j) {
      double mean = 0.0;
      for (const AftRecord& r : cond_train) mean += r.features[j];
      mean /= static_cast<double>(cond_train.size());
      double var = 0.0;
      for (const AftRecord& r : cond_train) {
        const double d = r.features[j] - mean;
        var += d * d;
      }
      if (var > 0.0) columns.push_back(j);
    }
    if (static_cast<int>(columns.size()) < kNumFeatures)
      rep.drops["constant_covariates"] =
          kNumFeatures - static_cast<long>(columns.size());
    if (columns.empty())
      throw std::runtime_error("all covariate columns are constant");

    std::vector<SurvivalRecord> train_surv, holdout_surv;
    for (const AftRecord& r : cond_train) train_surv.push_back(r.survival);
    for (const AftRecord& r : cond_holdout) holdout_surv.push_back(r.survival);

    // Proportional-hazards screen; a failure here is reported, not fatal.
    try {
      Matrix xc(static_cast<int>(cond_train.size()),
                static_cast<int>(columns.size()));
      for (size_t i = 0; i < cond_train.size(); ++i)
        for (size_t j = 0; j < columns.size(); ++j)
          xc(static_cast<int>(i), static_cast<int>(j)) =
              cond_train[i].features[columns[j]];
      CoxFit cox = fit_cox(train_surv, xc);
      rep.pha = pha_test(cox, train_surv, xc, cfg.pha_transform);
      for (int j : columns) rep.pha_covariates.push_back(kFeatureNames[j]);
      rep.pha_ok = true;
    } catch (const std::exception& e) {
      rep.pha_ok = false;
      rep.pha_error = e.what();
    }

    rep.km_train = km_confidence(km_fit(train_surv));
    KmCurve km_hold = km_confidence(km_fit(holdout_surv));
    if (km_hold.event_times.empty())
      throw std::runtime_error("holdout has no observed exit events");

    std::vector<FeatureVector> holdout_features;
    for (const AftRecord& r : cond_holdout) holdout_features.push_back(r.features);

    AftOptions options;
    options.columns = columns;
    SelectionResult sel =
        select_model(cond_train, holdout_features, km_hold, cfg.families,
                     cfg.wald_level, cfg.selection_slack, options);
    rep.selection = sel.record;
    rep.fit = sel.fit;

    // De-conditioning factor: mean predicted P(stay out of bankruptcy or
    // acquisition) over every holdout company in the sector.
    double p_v = 0.0;
    for (const CompanyRecord* c : ho)
      p_v += 1.0 - predict_proba(model, build_features(*c, ranks));
    p_v /= static_cast<double>(ho.size());

    rep.curve.t = km_hold.event_times;
    rep.curve.km_s = km_hold.estimates;
    rep.curve.km_lower = km_hold.lower;
    rep.curve.km_upper = km_hold.upper;
    rep.curve.n_risk = km_hold.at_risk;
    rep.curve.n_event = km_hold.deaths;
    rep.curve.p_v_mean = p_v;
    for (double t : rep.curve.t) {
      double mean = 0.0;
      for (const FeatureVector& x : holdout_features)
        mean += conditional_survival(rep.fit, x, t);
      mean /= static_cast<double>(holdout_features.size());
      rep.curve.aft_cond.push_back(mean);
      rep.curve.aft_uncond.push_back(mean * p_v);
    }
    rep.ok = true;
  } catch (const std::exception& e) {
    rep.ok = false;
    rep.error = e.what();
  }
  return rep;
}

}  // namespace

Report run_pipeline(const Dataset& data, const PipelineConfig& config) {
  if (!in_unit_interval(config.holdout_fraction))
    throw std::invalid_argument("run_pipeline: holdout_fraction must lie in (0, 1)");
  if (!in_unit_interval(config.classifier_holdout_fraction))
    throw std::invalid_argument(
        "run_pipeline: classifier_holdout_fraction must lie in (0, 1)");
  if (config.families.empty())
    throw std::invalid_argument("run_pipeline: no candidate families");
  if (data.companies.empty())
    throw std::runtime_error("run_pipeline: empty dataset");

  Report report;
  report.config_echo = config_to_json(config);
  report.provenance = data.provenance;
  report.classifier_config = config.classifier;

  auto parts = split(data, config.holdout_fraction, config.split_seed);
  const Dataset& train = parts.first;
  const Dataset& holdout = parts.second;
  if (train.companies.empty())
    throw std::runtime_error("run_pipeline: split left no training companies");
  if (holdout.companies.empty())
    throw std::runtime_error("run_pipeline: split left no holdout companies");
  report.provenance.notes.push_back(
      "split: " + std::to_string(train.companies.size()) + " train / " +
      std::to_string(holdout.companies.size()) + " holdout");

  const RankTable ranks = compute_investor_ranks(train);

  // Global classifier on the unconditional training data, judged on an
  // internal holdout carved from the training part.
  auto cparts = split(train, config.classifier_holdout_fraction,
                      derive_seed(config.classifier.seed, 1));
  const Dataset& ctrain = cparts.first;
  const Dataset& cheld = cparts.second;
  if (ctrain.companies.empty() || cheld.companies.empty())
    throw std::runtime_error("run_pipeline: classifier split left an empty part");

  Matrix x(static_cast<int>(ctrain.companies.size()), kNumFeatures);
  std::vector<int> y;
  for (size_t i = 0; i < ctrain.companies.size(); ++i) {
    const FeatureVector f = build_features(ctrain.companies[i], ranks);
    for (int j = 0; j < kNumFeatures; ++j) x(static_cast<int>(i), j) = f[j];
    y.push_back(is_positive_label(ctrain.companies[i]) ? 1 : 0);
  }
  long n_pos = 0;
  for (int label : y) n_pos += label;
  const long n_min = std::min<long>(n_pos, static_cast<long>(y.size()) - n_pos);

  MlpModel model;
  if (n_min >= 2) {
    Resampled rs = smote_resample(x, y, config.classifier.smote_k,
                                  derive_seed(config.classifier.seed, 2));
    model = train_mlp(rs.x, rs.y, config.classifier);
    if (rs.n_synthetic > 0)
      report.provenance.notes.push_back(
          "classifier: " + std::to_string(rs.n_synthetic) +
          " synthetic minority rows added before training");
  } else {
    model = train_mlp(x, y, config.classifier);
    report.provenance.notes.push_back(
        "classifier: resampling skipped (minority class has fewer than 2 rows)");
  }

  std::vector<int> predicted, actual;
  for (const CompanyRecord& c : cheld.companies) {
    predicted.push_back(classify(predict_proba(model, build_features(c, ranks))) ? 1 : 0);
    actual.push_back(is_positive_label(c) ? 1 : 0);
  }
  report.classifier_metrics = metrics(predicted, actual);

  std::set<int> sector_ids;
  for (const CompanyRecord& c : data.companies) sector_ids.insert(c.sector);

  // Sectors are independent given the shared classifier and rank table.
  std::vector<std::future<SectorReport>> futures;
  for (int id : sector_ids)
    futures.push_back(std::async(std::launch::async, [&, id] {
      return run_sector(id, train, holdout, ranks, model, config);
    }));
  for (auto& f : futures) {
    report.sectors.push_back(f.get());
    if (!report.sectors.back().ok) report.partial = true;
  }
  return report;
}

namespace {

nlohmann::json sector_to_json(const SectorReport& s) {
  nlohmann::json j;
  j["sector"] = s.sector;
  j["ok"] = s.ok;
  if (!s.ok) j["error"] = s.error;
  j["counts"] = {{"train", s.n_train},
                 {"train_conditional", s.n_train_conditional},
                 {"holdout", s.n_holdout},
                 {"holdout_conditional", s.n_holdout_conditional}};
  j["drops"] = s.drops;
  if (s.pha_ok || !s.pha_error.empty()) {
    nlohmann::json p;
    p["ok"] = s.pha_ok;
    if (s.pha_ok)
      p["report"] = pha_to_json(s.pha, s.pha_covariates);
    else
      p["error"] = s.pha_error;
    j["pha"] = p;
  }
  if (s.ok) {
    nlohmann::json selection;
    selection["attempts"] = nlohmann::json::array();
    for (const FamilyAttempt& at : s.selection.attempts) {
      nlohmann::json a;
      a["family"] = family_name(at.family);
      a["ok"] = at.ok;
      if (at.ok) {
        a["max_loglik"] = at.max_loglik;
        a["n_retained"] = at.n_retained;
        a["km_coverage"] = at.km_coverage;
      } else {
        a["error"] = at.error;
      }
      selection["attempts"].push_back(a);
    }
    selection["chosen"] = family_name(s.selection.chosen);
    selection["rationale"] = s.selection.rationale;
    j["selection"] = selection;
    j["fit"] = aft_to_json(s.fit);
    j["km_train"] = km_to_json(s.km_train);
    nlohmann::json curve;
    curve["t"] = s.curve.t;
    curve["km_s"] = s.curve.km_s;
    curve["km_lower"] = s.curve.km_lower;
    curve["km_upper"] = s.curve.km_upper;
    curve["n_risk"] = s.curve.n_risk;
    curve["n_event"] = s.curve.n_event;
    curve["aft_cond"] = s.curve.aft_cond;
    curve["aft_uncond"] = s.curve.aft_uncond;
    curve["p_v_mean"] = s.curve.p_v_mean;
    j["curve"] = curve;
  }
  return j;
}

SectorReport sector_from_json(const nlohmann::json& j) {
  SectorReport s;
  s.sector = j.at("sector").get<int>();
  s.ok = j.at("ok").get<bool>();
  if (!s.ok) s.error = j.at("error").get<std::string>();
  const auto& c = j.at("counts");
  s.n_train = c.at("train").get<long>();
  s.n_train_conditional = c.at("train_conditional").get<long>();
  s.n_holdout = c.at("holdout").get<long>();
  s.n_holdout_conditional = c.at("holdout_conditional").get<long>();
  s.drops = j.at("drops").get<std::map<std::string, long>>();
  if (j.count("pha")) {
    const auto& p = j.at("pha");
    s.pha_ok = p.at("ok").get<bool>();
    if (s.pha_ok)
      s.pha = pha_from_json(p.at("report"), s.pha_covariates);
    else
      s.pha_error = p.at("error").get<std::string>();
  }
  if (s.ok) {
    const auto& sel = j.at("selection");
    for (const auto& a : sel.at("attempts")) {
      FamilyAttempt at;
      at.family = family_from_name(a.at("family").get<std::string>());
      at.ok = a.at("ok").get<bool>();
      if (at.ok) {
        at.max_loglik = a.at("max_loglik").get<double>();
        at.n_retained = a.at("n_retained").get<int>();
        at.km_coverage = a.at("km_coverage").get<double>();
      } else {
        at.error = a.at("error").get<std::string>();
      }
      s.selection.attempts.push_back(at);
    }
    s.selection.chosen = family_from_name(sel.at("chosen").get<std::string>());
    s.selection.rationale = sel.at("rationale").get<std::string>();
    s.fit = aft_from_json(j.at("fit"));
    s.km_train = km_from_json(j.at("km_train"));
    const auto& cu = j.at("curve");
    s.curve.t = cu.at("t").get<std::vector<double>>();
    s.curve.km_s = cu.at("km_s").get<std::vector<double>>();
    s.curve.km_lower = cu.at("km_lower").get<std::vector<double>>();
    s.curve.km_upper = cu.at("km_upper").get<std::vector<double>>();
    s.curve.n_risk = cu.at("n_risk").get<std::vector<long>>();
    s.curve.n_event = cu.at("n_event").get<std::vector<long>>();
    s.curve.aft_cond = cu.at("aft_cond").get<std::vector<double>>();
    s.curve.aft_uncond = cu.at("aft_uncond").get<std::vector<double>>();
    s.curve.p_v_mean = cu.at("p_v_mean").get<double>();
  }
  return s;
}

}  // namespace

nlohmann::json report_to_json(const Report& report) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["partial"] = report.partial;
  j["config"] = report.config_echo;
  j["provenance"] = {{"source", report.provenance.source},
                     {"rows_read", report.provenance.rows_read},
                     {"dropped", report.provenance.dropped},
                     {"notes", report.provenance.notes}};
  j["classifier"] = {{"config", train_config_to_json(report.classifier_config)},
                     {"metrics", metrics_to_json(report.classifier_metrics)}};
  j["sectors"] = nlohmann::json::array();
  for (const SectorReport& s : report.sectors)
    j["sectors"].push_back(sector_to_json(s));
  return j;
}

Report report_from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != 1)
    throw std::runtime_error("report: unsupported format version");
  Report report;
  report.partial = j.at("partial").get<bool>();
  report.config_echo = j.at("config");
  const auto& p = j.at("provenance");
  report.provenance.source = p.at("source").get<std::string>();
  report.provenance.rows_read = p.at("rows_read").get<long>();
  report.provenance.dropped = p.at("dropped").get<std::map<std::string, long>>();
  report.provenance.notes = p.at("notes").get<std::vector<std::string>>();
  report.classifier_config = train_config_from_json(j.at("classifier").at("config"));
  report.classifier_metrics = metrics_from_json(j.at("classifier").at("metrics"));
  for (const auto& s : j.at("sectors"))
    report.sectors.push_back(sector_from_json(s));
  return report;
}

void save_report(const Report& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_report: cannot open " + path);
  out << report_to_json(report).dump(2) << '\n';
  if (!out) throw std::runtime_error("save_report: write failed for " + path);
}

Report load_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_report: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return report_from_json(j);
}

namespace {

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

// Plot geometry shared by every emitted figure.
constexpr double kW = 640, kH = 420;
constexpr double kX0 = 60, kX1 = 620, kY0 = 40, kY1 = 360;

std::string svg_polyline(const std::vector<double>& xs,
                         const std::vector<double>& ys, const char* style) {
  std::string out = "  <polyline style=\"";
  out += style;
  out += "\" points=\"";
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ' ';
    out += fmt2(xs[i]) + "," + fmt2(ys[i]);
  }
  out += "\"/>\n";
  return out;
}

std::string svg_curves(const SectorReport& s) {
  const SectorCurve& c = s.curve;
  double tmax = c.t.empty() ? 1.0 : c.t.back();
  if (tmax <= 0.0) tmax = 1.0;
  auto sx = [&](double t) { return kX0 + t / tmax * (kX1 - kX0); };
  auto sy = [&](double p) { return kY0 + (1.0 - p) * (kY1 - kY0); };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW
      << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW << " " << kH
      << "\">\n";
  out << "  <rect width=\"" << kW << "\" height=\"" << kH
      << "\" fill=\"white\"/>\n";
  out << "  <text x=\"" << fmt2((kX0 + kX1) / 2) << "\" y=\"24\" "
      << "text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
      << "Sector " << s.sector << " (" << family_name(s.selection.chosen)
      << ")</text>\n";

  // axes and ticks
  out << "  <line x1=\"" << fmt2(kX0) << "\" y1=\"" << fmt2(kY1) << "\" x2=\""
      << fmt2(kX1) << "\" y2=\"" << fmt2(kY1)
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  out << "  <line x1=\"" << fmt2(kX0) << "\" y1=\"" << fmt2(kY0) << "\" x2=\""
      << fmt2(kX0) << "\" y2=\"" << fmt2(kY1)
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double p = i / 4.0;
    out << "  <line x1=\"" << fmt2(kX0 - 4) << "\" y1=\"" << fmt2(sy(p))
        << "\" x2=\"" << fmt2(kX0) << "\" y2=\"" << fmt2(sy(p))
        << "\" stroke=\"black\"/>\n";
    out << "  <text x=\"" << fmt2(kX0 - 8) << "\" y=\"" << fmt2(sy(p) + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt2(p) << "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double t = tmax * i / 5.0;
    out << "  <line x1=\"" << fmt2(sx(t)) << "\" y1=\"" << fmt2(kY1)
        << "\" x2=\"" << fmt2(sx(t)) << "\" y2=\"" << fmt2(kY1 + 4)
        << "\" stroke=\"black\"/>\n";
    char lab[32];
    std::snprintf(lab, sizeof(lab), "%.1f", t);
    out << "  <text x=\"" << fmt2(sx(t)) << "\" y=\"" << fmt2(kY1 + 18)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">"
        << lab << "</text>\n";
  }
  out << "  <text x=\"" << fmt2((kX0 + kX1) / 2) << "\" y=\""
      << fmt2(kH - 12)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\">years since foundation</text>\n";
  out << "  <text x=\"16\" y=\"" << fmt2((kY0 + kY1) / 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\" transform=\"rotate(-90 16 "
      << fmt2((kY0 + kY1) / 2) << ")\">survival probability</text>\n";

  // step coordinates for the product-limit curve and its band
  auto step_xy = [&](const std::vector<double>& vals, double start) {
    std::pair<std::vector<double>, std::vector<double>> xy;
    xy.first.push_back(sx(0));
    xy.second.push_back(sy(start));
    double cur = start;
    for (size_t i = 0; i < c.t.size(); ++i) {
      xy.first.push_back(sx(c.t[i]));
      xy.second.push_back(sy(cur));
      xy.first.push_back(sx(c.t[i]));
      xy.second.push_back(sy(vals[i]));
      cur = vals[i];
    }
    return xy;
  };
  auto km = step_xy(c.km_s, 1.0);
  auto lo = step_xy(c.km_lower, 1.0);
  auto hi = step_xy(c.km_upper, 1.0);
  out << svg_polyline(lo.first, lo.second,
                      "fill:none;stroke:#888;stroke-width:1;stroke-dasharray:4 3");
  out << svg_polyline(hi.first, hi.second,
                      "fill:none;stroke:#888;stroke-width:1;stroke-dasharray:4 3");
  out << svg_polyline(km.first, km.second, "fill:none;stroke:black;stroke-width:1.5");

  auto line_xy = [&](const std::vector<double>& vals, double start) {
    std::pair<std::vector<double>, std::vector<double>> xy;
    xy.first.push_back(sx(0));
    xy.second.push_back(sy(start));
    for (size_t i = 0; i < c.t.size(); ++i) {
      xy.first.push_back(sx(c.t[i]));
      xy.second.push_back(sy(vals[i]));
    }
    return xy;
  };
  auto cond = line_xy(c.aft_cond, 1.0);
  auto uncond = line_xy(c.aft_uncond, c.p_v_mean);
  out << svg_polyline(cond.first, cond.second,
                      "fill:none;stroke:#1f77b4;stroke-width:1.5");
  out << svg_polyline(uncond.first, uncond.second,
                      "fill:none;stroke:#ff7f0e;stroke-width:1.5");

  // legend
  const char* labels[4] = {"Kaplan-Meier", "95% band", "model, conditional",
                           "model, de-conditioned"};
  const char* styles[4] = {
      "stroke:black;stroke-width:1.5",
      "stroke:#888;stroke-width:1;stroke-dasharray:4 3",
      "stroke:#1f77b4;stroke-width:1.5", "stroke:#ff7f0e;stroke-width:1.5"};
  for (int i = 0; i < 4; ++i) {
    const double ly = kY0 + 14 + 16 * i;
    out << "  <line x1=\"" << fmt2(kX1 - 170) << "\" y1=\"" << fmt2(ly)
        << "\" x2=\"" << fmt2(kX1 - 146) << "\" y2=\"" << fmt2(ly) << "\" style=\""
        << styles[i] << "\"/>\n";
    out << "  <text x=\"" << fmt2(kX1 - 140) << "\" y=\"" << fmt2(ly + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << labels[i]
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void write_sector_csv(const SectorReport& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit_curves: cannot open " + path);
  out.precision(17);
  out << "t,s,lower,upper,n_risk,n_event,aft_cond,aft_uncond\n";
  const SectorCurve& c = s.curve;
  for (size_t i = 0; i < c.t.size(); ++i)
    out << c.t[i] << ',' << c.km_s[i] << ',' << c.km_lower[i] << ','
        << c.km_upper[i] << ',' << c.n_risk[i] << ',' << c.n_event[i] << ','
        << c.aft_cond[i] << ',' << c.aft_uncond[i] << '\n';
}

}  // namespace

std::vector<std::string> emit_curves(const Report& report,
                                     const std::string& out_dir,
                                     CurveFormat format) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> files;
  nlohmann::json skipped = nlohmann::json::array();
  for (const SectorReport& s : report.sectors) {
    if (!s.ok) {
      skipped.push_back({{"sector", s.sector}, {"error", s.error}});
      continue;
    }
    const std::string name = "sector_" + std::to_string(s.sector) +
                             (format == CurveFormat::Csv ? "_curves.csv"
                                                         : "_curves.svg");
    const std::string path = out_dir + "/" + name;
    if (format == CurveFormat::Csv) {
      write_sector_csv(s, path);
    } else {
      std::ofstream out(path, std::ios::binary);
      if (!out) throw std::runtime_error("emit_curves: cannot open " + path);
      out << svg_curves(s);
    }
    files.push_back(name);
  }
  nlohmann::json manifest;
  manifest["files"] = files;
  manifest["skipped"] = skipped;
  std::ofstream out(out_dir + "/curves_manifest.json", std::ios::binary);
  if (!out)
    throw std::runtime_error("emit_curves: cannot open " + out_dir +
                             "/curves_manifest.json");
  out << manifest.dump(2) << '\n';
  return files;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("hash_file: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  char out[24];
  std::snprintf(out, sizeof(out), "%016llx",
                static_cast<unsigned long long>(fnv1a64(buf.str())));
  return out;
}

void write_manifest(const std::string& out_dir,
                    const std::map<std::string, std::string>& inputs,
                    const std::map<std::string, std::uint64_t>& seeds) {
  std::filesystem::create_directories(out_dir);
  nlohmann::json j;
  j["format_version"] = 1;
  j["tool"] = {{"name", "exitsurv"}, {"version", kToolVersion}};
  j["inputs"] = nlohmann::json::object();
  for (const auto& [name, path] : inputs)
    j["inputs"][name] = {{"path", path}, {"fnv1a64", hash_file(path)}};
  j["seeds"] = nlohmann::json::object();
  for (const auto& [name, value] : seeds) j["seeds"][name] = value;
  const std::string path = out_dir + "/manifest.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_manifest: cannot open " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write_manifest: write failed for " + path);
}

}  // namespace exitsurv
