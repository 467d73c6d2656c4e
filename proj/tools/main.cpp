#include <cstdio>
#include <filesystem>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "exitsurv/aft.hpp"
#include "exitsurv/classifier.hpp"
#include "exitsurv/cox.hpp"
#include "exitsurv/data.hpp"
#include "exitsurv/kaplan_meier.hpp"
#include "exitsurv/pipeline.hpp"
#include "exitsurv/rng.hpp"
#include "exitsurv/synthgen.hpp"

namespace {

using namespace exitsurv;

void print_provenance(const Provenance& p) {
  std::printf("source: %s\n", p.source.c_str());
  std::printf("rows read: %ld, kept: %ld, dropped: %ld\n", p.rows_read,
              p.rows_read - p.total_dropped(), p.total_dropped());
  for (const auto& [reason, count] : p.dropped)
    std::printf("  dropped %-28s %ld\n", (reason + ":").c_str(), count);
  for (const std::string& note : p.notes) std::printf("note: %s\n", note.c_str());
}

// Sector slice with durations attached; BA companies are excluded because
// they carry no exit time.
struct SectorData {
  std::vector<AftRecord> records;
  std::vector<SurvivalRecord> survival;
  std::vector<int> columns;  // non-constant feature columns
  std::vector<std::string> column_names;
};

SectorData conditional_sector(const Dataset& data, int sector, Date study_end) {
  RankTable ranks = compute_investor_ranks(data);
  SectorData out;
  long skipped = 0;
  for (const CompanyRecord& c : data.companies) {
    if (c.sector != sector) continue;
    if (c.status == Status::Bankrupt || c.status == Status::Acquisition) continue;
    try {
      SurvivalRecord s = build_survival_record(c, study_end);
      out.records.push_back({s, build_features(c, ranks)});
      out.survival.push_back(s);
    } catch (const std::exception&) {
      ++skipped;
    }
  }
  if (out.records.empty())
    throw std::runtime_error("sector " + std::to_string(sector) +
                             " has no usable IPO/private records");
  if (skipped > 0)
    std::fprintf(stderr, "warning: skipped %ld records with non-positive durations\n",
                 skipped);
  for (int j = 0; j < kNumFeatures; ++j) {
    double mean = 0.0;
    for (const AftRecord& r : out.records) mean += r.features[j];
    mean /= static_cast<double>(out.records.size());
    double var = 0.0;
    for (const AftRecord& r : out.records) {
      const double d = r.features[j] - mean;
      var += d * d;
    }
    if (var > 0.0) {
      out.columns.push_back(j);
      out.column_names.push_back(kFeatureNames[j]);
    }
  }
  if (out.columns.empty())
    throw std::runtime_error("sector " + std::to_string(sector) +
                             ": all covariate columns are constant");
  return out;
}

int cmd_ingest(const std::string& csv, const std::string& out_path) {
  Dataset data = parse_dataset(csv);
  write_dataset_csv_file(data, out_path);
  print_provenance(data.provenance);
  std::printf("wrote %zu companies to %s\n", data.companies.size(),
              out_path.c_str());
  return 0;
}

int cmd_synth(const std::string& config, std::uint64_t seed, bool seed_given,
              const std::string& out_path, const std::string& truth_path) {
  StudySpec spec = study_spec_from_toml(parse_toml_file(config));
  if (seed_given) spec.seed = seed;
  SynthResult result =
      generate_study(spec.sectors, spec.seed, spec.shared_investor_pool);
  write_dataset_csv_file(result.data, out_path);
  if (!truth_path.empty()) save_truth(result, truth_path);
  std::printf("generated %zu companies across %zu sectors (seed %llu) -> %s\n",
              result.data.companies.size(), spec.sectors.size(),
              static_cast<unsigned long long>(spec.seed), out_path.c_str());
  return 0;
}

int cmd_pha(const std::string& dataset, int sector, const std::string& transform,
            Date study_end) {
  Dataset data = parse_dataset(dataset);
  SectorData sd = conditional_sector(data, sector, study_end);
  Matrix x(static_cast<int>(sd.records.size()),
           static_cast<int>(sd.columns.size()));
  for (size_t i = 0; i < sd.records.size(); ++i)
    for (size_t j = 0; j < sd.columns.size(); ++j)
      x(static_cast<int>(i), static_cast<int>(j)) =
          sd.records[i].features[sd.columns[j]];
  CoxFit fit = fit_cox(sd.survival, x);
  PhaReport report = pha_test(fit, sd.survival, x,
                              transform == "identity" ? TimeTransform::Identity
                                                      : TimeTransform::Km);
  std::printf("proportional-hazards screen, sector %d (n=%zu, transform=%s)\n",
              sector, sd.records.size(), transform.c_str());
  std::printf("%-16s %12s %12s\n", "covariate", "chi2", "p");
  for (size_t j = 0; j < report.covariates.size(); ++j)
    std::printf("%-16s %12.4f %12.4g\n", sd.column_names[j].c_str(),
                report.covariates[j].chi2, report.covariates[j].p);
  std::printf("%-16s %12.4f %12.4g  (df=%d)\n", "GLOBAL", report.global_chi2,
              report.global_p, report.df);
  std::printf("proportional hazards %s at the 5%% level\n",
              report.rejected ? "rejected" : "not rejected");
  return 0;
}

int cmd_fit(const std::string& dataset, int sector, const std::string& family,
            double level, Date study_end, const std::string& out_path) {
  Dataset data = parse_dataset(dataset);
  SectorData sd = conditional_sector(data, sector, study_end);
  const Family fam = family_from_name(family);
  AftOptions options;
  options.columns = sd.columns;
  AftFit full = fit_aft(fam, sd.records, options);
  WaldReport wald = wald_test(full, level);
  std::printf("%s fit, sector %d: n=%zu (%ld events, %ld censored)\n",
              family_name(fam), sector, sd.records.size(), full.n_events,
              full.n_censored);
  std::printf("log-likelihood %.6f, intercept %.6f, scale %.6f\n",
              full.max_loglik, full.intercept, full.scale);
  if (fam == Family::GeneralizedF)
    std::printf("shape m1 %.6f, m2 %.6f\n", full.m1, full.m2);
  std::printf("%-16s %12s %10s %8s %10s %s\n", "covariate", "estimate", "se",
              "z", "p", "keep");
  for (const WaldEntry& e : wald.entries)
    std::printf("%-16s %12.6f %10.4f %8.3f %10.4g %s\n",
                kFeatureNames[e.feature], e.estimate, e.se, e.z, e.p,
                e.significant ? "yes" : "no");
  AftFit selected = select_covariates(fam, sd.records, level, options);
  std::printf("refit on %zu covariates significant at %.0f%%: log-likelihood %.6f\n",
              selected.retained.size(), 100 * level, selected.max_loglik);
  if (!out_path.empty()) {
    save_aft(selected, out_path);
    std::printf("wrote selected fit to %s\n", out_path.c_str());
  }
  return 0;
}

int cmd_train_clf(const std::string& dataset, std::uint64_t seed,
                  const std::string& out_path) {
  Dataset data = parse_dataset(dataset);
  RankTable ranks = compute_investor_ranks(data);
  TrainConfig config;
  config.seed = seed;

  auto parts = split(data, 1.0 / 3.0, derive_seed(seed, 1));
  const Dataset& train = parts.first;
  const Dataset& held = parts.second;
  if (train.companies.empty() || held.companies.empty())
    throw std::runtime_error("dataset too small for a 2/3-1/3 split");

  Matrix x(static_cast<int>(train.companies.size()), kNumFeatures);
  std::vector<int> y;
  for (size_t i = 0; i < train.companies.size(); ++i) {
    const FeatureVector f = build_features(train.companies[i], ranks);
    for (int j = 0; j < kNumFeatures; ++j) x(static_cast<int>(i), j) = f[j];
    y.push_back(train.companies[i].status == Status::Bankrupt ||
                        train.companies[i].status == Status::Acquisition
                    ? 1
                    : 0);
  }
  long n_pos = 0;
  for (int label : y) n_pos += label;
  const long n_min = std::min<long>(n_pos, static_cast<long>(y.size()) - n_pos);

  MlpModel model;
  if (n_min >= 2) {
    Resampled rs = smote_resample(x, y, config.smote_k, derive_seed(seed, 2));
    std::printf("resampled %ld synthetic minority rows (%zu -> %zu)\n",
                rs.n_synthetic, y.size(), rs.y.size());
    model = train_mlp(rs.x, rs.y, config);
  } else {
    std::printf("resampling skipped: minority class has fewer than 2 rows\n");
    model = train_mlp(x, y, config);
  }

  std::vector<int> predicted, actual;
  for (const CompanyRecord& c : held.companies) {
    predicted.push_back(classify(predict_proba(model, build_features(c, ranks))) ? 1 : 0);
    actual.push_back(c.status == Status::Bankrupt ||
                             c.status == Status::Acquisition
                         ? 1
                         : 0);
  }
  std::cout << metrics_to_json(metrics(predicted, actual)).dump(2) << "\n";
  if (!out_path.empty()) {
    save_mlp(model, out_path);
    std::printf("wrote model to %s\n", out_path.c_str());
  }
  return 0;
}

int cmd_run(const std::string& dataset, const std::string& config_path,
            const std::string& out_dir) {
  PipelineConfig config = load_pipeline_config(config_path);
  Dataset data = parse_dataset(dataset);
  Report report = run_pipeline(data, config);

  std::filesystem::create_directories(out_dir);
  save_report(report, out_dir + "/report.json");
  emit_curves(report, out_dir, CurveFormat::Csv);
  write_manifest(out_dir, {{"dataset", dataset}, {"config", config_path}},
                 {{"split", config.split_seed},
                  {"classifier", config.classifier.seed}});

  for (const SectorReport& s : report.sectors) {
    if (s.ok)
      std::printf("sector %d: chose %s (%s)\n", s.sector,
                  family_name(s.selection.chosen),
                  s.selection.rationale.c_str());
    else
      std::printf("sector %d: FAILED (%s)\n", s.sector, s.error.c_str());
  }
  std::printf("%s report + curves + manifest written to %s\n",
              report.partial ? "PARTIAL" : "complete", out_dir.c_str());
  return 0;
}

int cmd_curves(const std::string& report_path, const std::string& format,
               const std::string& out_dir) {
  Report report = load_report(report_path);
  const CurveFormat fmt =
      format == "svg" ? CurveFormat::Svg : CurveFormat::Csv;
  std::vector<std::string> files = emit_curves(report, out_dir, fmt);
  for (const std::string& f : files) std::printf("wrote %s/%s\n", out_dir.c_str(), f.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exit-time survival modeling for private-equity portfolios"};
  app.require_subcommand(1);

  std::string csv, out_path, dataset, config_path, family, report_path;
  std::string truth_path, transform = "km", format = "csv";
  std::string study_end_str = "2018-12-31";
  std::uint64_t seed = 0;
  int sector = 0;
  double level = 0.10;

  CLI::App* ingest = app.add_subcommand("ingest", "normalize a raw company CSV");
  ingest->add_option("csv", csv, "input CSV path")->required();
  ingest->add_option("--out", out_path, "normalized dataset path")->required();

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic study");
  synth->add_option("--config", config_path, "study TOML")->required();
  CLI::Option* seed_opt = synth->add_option("--seed", seed, "master seed");
  synth->add_option("--out", out_path, "output CSV path")->required();
  synth->add_option("--truth", truth_path, "also write ground truth JSON");

  CLI::App* pha = app.add_subcommand("pha", "proportional-hazards screen");
  pha->add_option("--dataset", dataset, "dataset CSV")->required();
  pha->add_option("--sector", sector, "sector id")->required();
  pha->add_option("--transform", transform, "time transform: km|identity")
      ->check(CLI::IsMember({"km", "identity"}));
  pha->add_option("--study-end", study_end_str, "censoring date (YYYY-MM-DD)");

  CLI::App* fit = app.add_subcommand("fit", "fit one survival family");
  fit->add_option("--dataset", dataset, "dataset CSV")->required();
  fit->add_option("--sector", sector, "sector id")->required();
  fit->add_option("--family", family,
                  "exponential|weibull|lognormal|generalized_f")
      ->required();
  fit->add_option("--level", level, "covariate-selection level");
  fit->add_option("--study-end", study_end_str, "censoring date (YYYY-MM-DD)");
  fit->add_option("--out", out_path, "save the selected fit as JSON");

  CLI::App* clf = app.add_subcommand("train-clf", "train the exit classifier");
  clf->add_option("--dataset", dataset, "dataset CSV")->required();
  clf->add_option("--seed", seed, "training seed")->required();
  clf->add_option("--out", out_path, "save the model as JSON");

  CLI::App* run = app.add_subcommand("run", "full per-sector pipeline");
  run->add_option("--dataset", dataset, "dataset CSV")->required();
  run->add_option("--config", config_path, "pipeline TOML")->required();
  run->add_option("--out", out_path, "output directory")->required();

  CLI::App* curves = app.add_subcommand("curves", "render curves from a report");
  curves->add_option("--report", report_path, "report JSON path")->required();
  curves->add_option("--format", format, "csv|svg")
      ->check(CLI::IsMember({"csv", "svg"}));
  curves->add_option("--out", out_path, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(csv, out_path);
    if (*synth)
      return cmd_synth(config_path, seed, seed_opt->count() > 0, out_path,
                       truth_path);
    if (*pha) {
      Date end = make_date(2018, 12, 31);
      if (!try_parse_date(study_end_str, end))
        throw std::runtime_error("bad --study-end date: " + study_end_str);
      return cmd_pha(dataset, sector, transform, end);
    }
    if (*fit) {
      Date end = make_date(2018, 12, 31);
      if (!try_parse_date(study_end_str, end))
        throw std::runtime_error("bad --study-end date: " + study_end_str);
      return cmd_fit(dataset, sector, family, level, end, out_path);
    }
    if (*clf) return cmd_train_clf(dataset, seed, out_path);
    if (*run) return cmd_run(dataset, config_path, out_path);
    if (*curves) return cmd_curves(report_path, format, out_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
