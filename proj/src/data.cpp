#include "exitsurv/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "exitsurv/csv.hpp"
#include "exitsurv/rng.hpp"

namespace exitsurv {

const char* status_name(Status s) {
  switch (s) {
    case Status::IPO: return "IPO";
    case Status::Bankrupt: return "BANKRUPT";
    case Status::Acquisition: return "ACQUISITION";
    case Status::Private: return "PRIVATE";
  }
  return "?";
}

std::optional<Status> status_from_string(const std::string& s) {
  std::string up;
  up.reserve(s.size());
  for (char c : s) up += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (up == "IPO") return Status::IPO;
  if (up == "BANKRUPT") return Status::Bankrupt;
  if (up == "ACQUISITION" || up == "LBO" || up == "M&A") return Status::Acquisition;
  if (up == "PRIVATE") return Status::Private;
  return std::nullopt;
}

long Provenance::total_dropped() const {
  long n = 0;
  for (const auto& [_, c] : dropped) n += c;
  return n;
}

std::string normalize_investor_name(const std::string& raw) {
  size_t b = raw.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = raw.find_last_not_of(" \t\r\n");
  std::string out = raw.substr(b, e - b + 1);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

int RankTable::lookup(const std::string& raw_name) const {
  auto it = rank.find(normalize_investor_name(raw_name));
  return it == rank.end() ? 0 : it->second;
}

const std::array<const char*, kNumFeatures> kFeatureNames = {
    "avg_rank_1", "max_rank_1", "min_rank_1", "n_investors_1",
    "avg_rank_2", "max_rank_2", "min_rank_2", "n_investors_2",
    "avg_rank_3", "max_rank_3", "min_rank_3", "n_investors_3",
    "vix_1",      "vix_2"};

namespace {

const std::vector<std::string> kCsvHeader = {
    "company_id", "sector", "status", "foundation_date", "ipo_date",
    "inv1",       "inv2",   "inv3",   "date1",           "date2",
    "date3",      "vix1",   "vix2"};

std::vector<std::string> split_semicolon(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(s);
  while (std::getline(ss, cur, ';')) {
    if (!normalize_investor_name(cur).empty()) out.push_back(cur);
  }
  return out;
}

bool parse_double(const std::string& s, double& out) {
  try {
    size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

bool parse_int(const std::string& s, int& out) {
  try {
    size_t pos = 0;
    out = std::stoi(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

// One row -> CompanyRecord, or a drop reason.
std::optional<CompanyRecord> parse_row(const std::vector<std::string>& f,
                                       std::string& reason) {
  CompanyRecord c;
  c.company_id = f[0];
  if (c.company_id.empty()) {
    reason = "missing_company_id";
    return std::nullopt;
  }
  if (!parse_int(f[1], c.sector) || c.sector < 1 || c.sector > 9) {
    reason = "bad_sector";
    return std::nullopt;
  }
  auto st = status_from_string(f[2]);
  if (!st) {
    reason = "bad_status";
    return std::nullopt;
  }
  c.status = *st;
  if (!try_parse_date(f[3], c.foundation_date)) {
    reason = "bad_foundation_date";
    return std::nullopt;
  }
  if (!f[4].empty()) {
    Date d;
    if (!try_parse_date(f[4], d)) {
      reason = "bad_ipo_date";
      return std::nullopt;
    }
    c.ipo_date = d;
  }
  if ((c.status == Status::IPO) != c.ipo_date.has_value()) {
    reason = "status_ipo_date_mismatch";
    return std::nullopt;
  }
  if (c.ipo_date && *c.ipo_date < c.foundation_date) {
    reason = "ipo_before_foundation";
    return std::nullopt;
  }

  const std::string inv[3] = {f[5], f[6], f[7]};
  const std::string dates[3] = {f[8], f[9], f[10]};
  const std::string vix[2] = {f[11], f[12]};
  bool ended = false;
  for (int r = 0; r < 3; ++r) {
    auto names = split_semicolon(inv[r]);
    if (names.empty()) {
      ended = true;
      continue;
    }
    if (ended) {
      reason = "round_gap";
      return std::nullopt;
    }
    RoundRecord round;
    round.investor_names = std::move(names);
    if (!try_parse_date(dates[r], round.round_date)) {
      reason = "bad_round_date";
      return std::nullopt;
    }
    if (r < 2) {
      double v;
      if (!parse_double(vix[r], v) || v < 0.0) {
        reason = "bad_vix";
        return std::nullopt;
      }
      round.vix = v;
    }
    c.rounds.push_back(std::move(round));
  }
  if (c.rounds.empty()) {
    reason = "no_rounds";
    return std::nullopt;
  }
  return c;
}

}  // namespace

Dataset parse_dataset_stream(std::istream& in, const std::string& source) {
  CsvTable table = read_csv(in);
  if (table.header != kCsvHeader) {
    std::string missing;
    for (const auto& col : kCsvHeader)
      if (std::find(table.header.begin(), table.header.end(), col) ==
          table.header.end())
        missing += (missing.empty() ? "" : ", ") + col;
    throw std::runtime_error(
        "CSV header mismatch in " + source +
        (missing.empty() ? " (column order)" : ": missing column(s) " + missing));
  }

  Dataset ds;
  ds.provenance.source = source;
  for (const auto& row : table.rows) {
    ++ds.provenance.rows_read;
    if (row.size() != kCsvHeader.size()) {
      ++ds.provenance.dropped["wrong_field_count"];
      continue;
    }
    std::string reason;
    auto rec = parse_row(row, reason);
    if (rec) ds.companies.push_back(std::move(*rec));
    else ++ds.provenance.dropped[reason];
  }
  return ds;
}

Dataset parse_dataset(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot open file: " + csv_path);
  return parse_dataset_stream(in, csv_path);
}

void write_dataset_csv(const Dataset& data, std::ostream& out) {
  write_csv_row(out, kCsvHeader);
  std::ostringstream num;
  for (const auto& c : data.companies) {
    std::vector<std::string> f(kCsvHeader.size());
    f[0] = c.company_id;
    f[1] = std::to_string(c.sector);
    f[2] = status_name(c.status);
    f[3] = format_date(c.foundation_date);
    f[4] = c.ipo_date ? format_date(*c.ipo_date) : "";
    for (size_t r = 0; r < c.rounds.size(); ++r) {
      std::string names;
      for (size_t i = 0; i < c.rounds[r].investor_names.size(); ++i) {
        if (i) names += ';';
        names += c.rounds[r].investor_names[i];
      }
      f[5 + r] = names;
      f[8 + r] = format_date(c.rounds[r].round_date);
      if (r < 2 && c.rounds[r].vix) {
        num.str("");
        num.precision(17);
        num << *c.rounds[r].vix;
        f[11 + r] = num.str();
      }
    }
    write_csv_row(out, f);
  }
}

void write_dataset_csv_file(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  write_dataset_csv(data, out);
}

RankTable compute_investor_ranks(const Dataset& training) {
  if (training.companies.empty())
    throw std::invalid_argument("compute_investor_ranks: empty dataset");
  RankTable t;
  for (const auto& c : training.companies)
    for (const auto& round : c.rounds)
      for (const auto& name : round.investor_names)
        ++t.rank[normalize_investor_name(name)];
  return t;
}

FeatureVector build_features(const CompanyRecord& company, const RankTable& ranks) {
  if (company.rounds.empty())
    throw std::invalid_argument("build_features: company has no rounds");
  FeatureVector x{};
  for (size_t r = 0; r < 3; ++r) {
    if (r >= company.rounds.size()) continue;  // padded with zeros
    const auto& round = company.rounds[r];
    double sum = 0.0;
    double mx = 0.0, mn = 0.0;
    for (size_t i = 0; i < round.investor_names.size(); ++i) {
      double rank = ranks.lookup(round.investor_names[i]);
      sum += rank;
      if (i == 0) {
        mx = mn = rank;
      } else {
        mx = std::max(mx, rank);
        mn = std::min(mn, rank);
      }
    }
    double n = static_cast<double>(round.investor_names.size());
    x[4 * r + 0] = sum / n;
    x[4 * r + 1] = mx;
    x[4 * r + 2] = mn;
    x[4 * r + 3] = n;
  }
  if (company.rounds.size() > 0 && company.rounds[0].vix) x[12] = *company.rounds[0].vix;
  if (company.rounds.size() > 1 && company.rounds[1].vix) x[13] = *company.rounds[1].vix;
  return x;
}

SurvivalRecord build_survival_record(const CompanyRecord& company, Date study_end) {
  if (company.status == Status::Bankrupt || company.status == Status::Acquisition)
    throw std::domain_error(
        "build_survival_record: company '" + company.company_id +
        "' has a bankrupt/acquisition outcome; filter the dataset first");
  SurvivalRecord rec;
  if (company.status == Status::IPO) {
    rec.duration = years_between(company.foundation_date, *company.ipo_date);
    rec.event = true;
  } else {
    rec.duration = years_between(company.foundation_date, study_end);
    rec.event = false;
  }
  if (!(rec.duration > 0.0))
    throw std::runtime_error("build_survival_record: non-positive duration for '" +
                             company.company_id + "'");
  return rec;
}

Dataset filter_conditional(const Dataset& data) {
  Dataset out;
  out.provenance = data.provenance;
  for (const auto& c : data.companies) {
    if (c.status == Status::IPO || c.status == Status::Private)
      out.companies.push_back(c);
    else if (c.status == Status::Bankrupt)
      ++out.provenance.dropped["excluded_bankrupt"];
    else
      ++out.provenance.dropped["excluded_acquisition"];
  }
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& data, double holdout_fraction,
                                  std::uint64_t seed) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
    throw std::invalid_argument("split: holdout fraction must lie in (0, 1)");
  size_t n = data.companies.size();
  if (n < 2) throw std::invalid_argument("split: need at least 2 companies");

  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  // Fisher-Yates with the portable generator; std::shuffle's permutation
  // order is implementation-defined.
  Rng rng(seed);
  for (size_t i = n - 1; i > 0; --i) {
    size_t j = rng.uniform_int(i + 1);
    std::swap(idx[i], idx[j]);
  }

  size_t n_holdout = static_cast<size_t>(std::llround(holdout_fraction * static_cast<double>(n)));

  std::vector<bool> in_holdout(n, false);
  for (size_t i = 0; i < n_holdout; ++i) in_holdout[idx[i]] = true;

  Dataset train, holdout;
  train.provenance = data.provenance;
  holdout.provenance = data.provenance;
  train.provenance.notes.push_back("train part of split");
  holdout.provenance.notes.push_back("holdout part of split");
  for (size_t i = 0; i < n; ++i) {
    if (in_holdout[i]) holdout.companies.push_back(data.companies[i]);
    else train.companies.push_back(data.companies[i]);
  }
  return {std::move(train), std::move(holdout)};
}

}  // namespace exitsurv
