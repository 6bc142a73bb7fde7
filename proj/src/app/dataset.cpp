#include "ckm/app/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include "ckm/app/format.hpp"

namespace ckm::app {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  for (auto& c : out) {
    const auto b = c.find_first_not_of(" \t");
    const auto e = c.find_last_not_of(" \t");
    c = b == std::string::npos ? std::string() : c.substr(b, e - b + 1);
  }
  return out;
}

bool skippable(const std::string& line) {
  const auto first = line.find_first_not_of(" \t");
  return first == std::string::npos || line[first] == '#';
}

double parse_cell(const std::string& s, const std::string& column) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::MalformedValue, "column " + column + ": '" + s + "' is not a number");
  }
  return v;
}

int parse_indicator(const std::string& s, const std::string& column) {
  const double v = parse_cell(s, column);
  if (v != 0.0 && v != 1.0) {
    throw Error(ErrorCode::NonBinaryIndicator, "column " + column + " must be 0 or 1, got " + s);
  }
  return static_cast<int>(v);
}

std::chrono::sys_days parse_date(const std::string& s) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  if (std::sscanf(s.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3) {
    throw Error(ErrorCode::MalformedValue, "'" + s + "' is not a YYYY-MM-DD date");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!ymd.ok()) throw Error(ErrorCode::MalformedValue, "'" + s + "' is not a valid date");
  return std::chrono::sys_days{ymd};
}

std::string format_date(std::chrono::sys_days d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

}  // namespace

Dataset ingest_csv(std::istream& in, const IngestOptions& options, std::string source) {
  Dataset ds;
  ds.source = std::move(source);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (skippable(line)) continue;
    header = split_line(line);
    break;
  }
  if (header.empty()) throw Error(ErrorCode::MissingColumn, ds.source + ": no header row");

  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!col.emplace(header[i], i).second) {
      throw Error(ErrorCode::MissingColumn, "duplicate column '" + header[i] + "'");
    }
  }
  for (const char* required : {"w", "delta"}) {
    if (!col.count(required)) {
      throw Error(ErrorCode::MissingColumn, std::string("missing column '") + required + "'");
    }
  }
  ds.has_eta = col.count("eta") > 0;
  ds.has_p_hat = col.count("p_hat") > 0;
  if (options.require_eta && !ds.has_eta) {
    throw Error(ErrorCode::MissingColumn, "precomputed judgments need an 'eta' column");
  }
  std::vector<std::size_t> zcols;
  if (options.covariates.empty()) {
    const std::regex zname("z_[0-9]+");
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (std::regex_match(header[i], zname)) {
        zcols.push_back(i);
        ds.covariate_names.push_back(header[i]);
      }
    }
  } else {
    for (const auto& name : options.covariates) {
      const auto it = col.find(name);
      if (it == col.end()) throw Error(ErrorCode::MissingColumn, "missing covariate '" + name + "'");
      zcols.push_back(it->second);
      ds.covariate_names.push_back(name);
    }
  }
  if (zcols.empty()) throw Error(ErrorCode::MissingColumn, "no covariate columns (z_1, ...)");

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (skippable(line)) continue;
    try {
      const auto cells = split_line(line);
      if (cells.size() != header.size()) {
        throw Error(ErrorCode::RaggedCovariates, "expected " + std::to_string(header.size()) +
                                                     " fields, found " +
                                                     std::to_string(cells.size()));
      }
      Observation o;
      o.w = parse_cell(cells[col["w"]], "w");
      if (!std::isfinite(o.w)) throw Error(ErrorCode::MalformedValue, "w is not finite");
      if (o.w < 0.0) throw Error(ErrorCode::NegativeTime, "negative time " + cells[col["w"]]);
      o.delta = parse_indicator(cells[col["delta"]], "delta");
      if (ds.has_eta) {
        o.eta = parse_indicator(cells[col["eta"]], "eta");
        if (*o.eta > o.delta) throw Error(ErrorCode::InvalidArgument, "eta = 1 with delta = 0");
      }
      for (std::size_t c = 0; c < zcols.size(); ++c) {
        const double v = parse_cell(cells[zcols[c]], ds.covariate_names[c]);
        if (!std::isfinite(v)) {
          throw Error(ErrorCode::MalformedValue, ds.covariate_names[c] + " is not finite");
        }
        o.z.push_back(v);
      }
      double p = 1.0;
      if (ds.has_p_hat) {
        p = parse_cell(cells[col["p_hat"]], "p_hat");
        if (!(p >= 0.0 && p <= 1.0)) {
          throw Error(ErrorCode::InvalidProbability, "p_hat outside [0,1]");
        }
      }
      ds.rows.push_back(std::move(o));
      if (ds.has_p_hat) ds.p_hat.push_back(p);
    } catch (const Error& e) {
      const std::string where = ds.source + " line " + std::to_string(line_no) + ": ";
      if (!options.skip_bad) throw Error(e.code(), where + e.what());
      ds.rejected.push_back({line_no, e.code(), e.what()});
    }
  }
  if (ds.rows.empty()) throw Error(ErrorCode::InvalidArgument, ds.source + ": no usable rows");
  return ds;
}

Dataset ingest_csv(const std::filesystem::path& path, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open data file '" + path.string() + "'");
  return ingest_csv(in, options, path.string());
}

void write_observations_csv(std::ostream& os, const std::vector<Observation>& rows,
                            const std::vector<std::string>& covariate_names) {
  const bool eta = !rows.empty() && rows.front().eta.has_value();
  os << "w,delta";
  if (eta) os << ",eta";
  for (const auto& n : covariate_names) os << ',' << n;
  os << '\n';
  for (const auto& o : rows) {
    os << format_double(o.w) << ',' << o.delta;
    if (eta) os << ',' << *o.eta;
    for (double z : o.z) os << ',' << format_double(z);
    os << '\n';
  }
}

std::vector<Observation> loans_to_observations(const std::vector<LoanRecord>& loans) {
  constexpr double kDaysPerMonth = 30.4375;
  std::vector<Observation> out;
  out.reserve(loans.size());
  for (const auto& l : loans) {
    const bool defaulted = l.default_date && *l.default_date <= l.cutoff;
    const auto end = defaulted ? *l.default_date : std::min(l.last_payment, l.cutoff);
    const auto days = (end - l.issue).count();
    if (days < 0) throw Error(ErrorCode::NegativeTime, "loan ends before it is issued");
    out.push_back({static_cast<double>(days) / kDaysPerMonth, defaulted ? 1 : 0,
                   {l.dti, l.ir}, std::nullopt});
  }
  return out;
}

std::vector<LoanRecord> read_loans_csv(std::istream& in) {
  std::string line;
  std::vector<std::string> header;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (skippable(line)) continue;
    header = split_line(line);
    break;
  }
  const std::vector<std::string> expected{"issue_date", "last_payment_date", "default_date",
                                          "cutoff_date", "dti", "ir"};
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const auto& name : expected) {
    if (!col.count(name)) throw Error(ErrorCode::MissingColumn, "loan file lacks '" + name + "'");
  }
  std::vector<LoanRecord> loans;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (skippable(line)) continue;
    try {
      const auto cells = split_line(line);
      if (cells.size() != header.size()) {
        throw Error(ErrorCode::RaggedCovariates, "wrong number of fields");
      }
      LoanRecord l{};
      l.issue = parse_date(cells[col["issue_date"]]);
      l.last_payment = parse_date(cells[col["last_payment_date"]]);
      if (!cells[col["default_date"]].empty()) l.default_date = parse_date(cells[col["default_date"]]);
      l.cutoff = parse_date(cells[col["cutoff_date"]]);
      l.dti = parse_cell(cells[col["dti"]], "dti");
      l.ir = parse_cell(cells[col["ir"]], "ir");
      loans.push_back(l);
    } catch (const Error& e) {
      throw Error(e.code(), "loan file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return loans;
}

void write_loans_csv(std::ostream& os, const std::vector<LoanRecord>& loans) {
  os << "issue_date,last_payment_date,default_date,cutoff_date,dti,ir\n";
  for (const auto& l : loans) {
    os << format_date(l.issue) << ',' << format_date(l.last_payment) << ','
       << (l.default_date ? format_date(*l.default_date) : std::string()) << ','
       << format_date(l.cutoff) << ',' << format_double(l.dti) << ',' << format_double(l.ir)
       << '\n';
  }
}

}  // namespace ckm::app
