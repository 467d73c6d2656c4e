#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "exitsurv/dates.hpp"

namespace exitsurv {

enum class Status { IPO, Bankrupt, Acquisition, Private };

const char* status_name(Status s);
// Case-insensitive; "LBO" and "M&A" are aliases of ACQUISITION.
std::optional<Status> status_from_string(const std::string& s);

struct RoundRecord {
  std::vector<std::string> investor_names;  // non-empty
  Date round_date;
  std::optional<double> vix;  // rounds 1-2 only
};

struct CompanyRecord {
  std::string company_id;
  int sector = 0;  // 1..9
  Status status = Status::Private;
  Date foundation_date;
  std::optional<Date> ipo_date;  // present iff status == IPO
  std::vector<RoundRecord> rounds;  // 1..3
};

struct Provenance {
  std::string source;
  long rows_read = 0;
  std::map<std::string, long> dropped;  // reason -> count
  std::vector<std::string> notes;

  long total_dropped() const;
};

struct Dataset {
  std::vector<CompanyRecord> companies;
  Provenance provenance;
};

// Investor rank = number of rounds the investor participated in across
// the source dataset. Keys are normalized names (trimmed, case-folded).
struct RankTable {
  std::unordered_map<std::string, int> rank;

  // 0 for investors never seen in training.
  int lookup(const std::string& raw_name) const;
};

std::string normalize_investor_name(const std::string& raw);

constexpr int kNumFeatures = 14;
using FeatureVector = std::array<double, kNumFeatures>;

// Feature layout: per round r in {1,2,3}: avg_rank, max_rank, min_rank,
// n_investors; then vix_1, vix_2. Absent rounds pad their stats with 0,
// an absent round 2 pads vix_2 with 0.
extern const std::array<const char*, kNumFeatures> kFeatureNames;

struct SurvivalRecord {
  double duration = 0.0;  // years, > 0
  bool event = false;     // true = IPO observed, false = right-censored
};

// CSV ingestion. Rows with missing or unparseable required fields are
// dropped and counted per reason in provenance; a bad header is an error.
Dataset parse_dataset(const std::string& csv_path);
Dataset parse_dataset_stream(std::istream& in, const std::string& source);
void write_dataset_csv(const Dataset& data, std::ostream& out);
void write_dataset_csv_file(const Dataset& data, const std::string& path);

RankTable compute_investor_ranks(const Dataset& training);

FeatureVector build_features(const CompanyRecord& company, const RankTable& ranks);

SurvivalRecord build_survival_record(const CompanyRecord& company, Date study_end);

// Keeps IPO and Private companies only; exclusions land in provenance.
Dataset filter_conditional(const Dataset& data);

// Uniform random partition; |holdout| = round(fraction * n).
std::pair<Dataset, Dataset> split(const Dataset& data, double holdout_fraction,
                                  std::uint64_t seed);

}  // namespace exitsurv
