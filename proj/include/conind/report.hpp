#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "conind/error.hpp"
#include "conind/ratio.hpp"
#include "conind/stats.hpp"

namespace conind {

inline constexpr const char* kMissing = "NA";

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s = buf;
  if (s.rfind("-0.", 0) == 0 && s.find_first_not_of("0.", 1) == std::string::npos) s.erase(0, 1);
  return s;
}

inline std::string format_percent(double v) { return fixed(v, 2); }
inline std::string format_z(double z) { return fixed(z, 2); }

/// Five decimals, or "<0.00001" below 1e-5.
inline std::string format_p(double p) { return p < 1e-5 ? std::string("<0.00001") : fixed(p, 5); }

inline std::string tsv_safe(std::string s) {
  for (char& c : s)
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  return s;
}

struct Table1Row {
  std::size_t neuron = 0;
  std::string concepts;
  std::optional<Ratio> coverage;
  std::optional<double> tla_pct;
  std::optional<double> non_tla_pct;
};

struct Table2Row {
  std::size_t neuron = 0;
  std::string concepts;
  std::optional<double> tla_pct;
  std::optional<double> non_tla_pct;
  std::optional<MannWhitneyResult> stats;
  std::optional<bool> reject_null;
};

/// Rows whose TLA is at least 80%, order preserved. Rows without a TLA are dropped.
inline std::vector<Table1Row> filter_confirmed(const std::vector<Table1Row>& rows) {
  std::vector<Table1Row> out;
  for (const auto& r : rows)
    if (r.tla_pct && *r.tla_pct >= 80.0) out.push_back(r);
  return out;
}

inline const char* table1_header() { return "neuron_id\tconcepts\tcoverage\ttla_pct\tnon_tla_pct"; }

inline const char* table2_header() {
  return "neuron_id\tconcepts\ttla_pct\tnon_tla_pct\ttarget_median\tnontarget_median\ttarget_mean\t"
         "nontarget_mean\tz_score\tp_value\treject_null";
}

inline void write_table1(std::ostream& out, const std::vector<Table1Row>& rows) {
  auto opt = [](const std::optional<double>& v) { return v ? format_percent(*v) : std::string(kMissing); };
  out << table1_header() << '\n';
  for (const auto& r : rows) {
    out << r.neuron << '\t' << tsv_safe(r.concepts.empty() ? kMissing : r.concepts) << '\t'
        << (r.coverage ? r.coverage->decimal(3) : kMissing) << '\t' << opt(r.tla_pct) << '\t' << opt(r.non_tla_pct)
        << '\n';
  }
}

inline void write_table2(std::ostream& out, const std::vector<Table2Row>& rows) {
  auto opt = [](const std::optional<double>& v) { return v ? format_percent(*v) : std::string(kMissing); };
  out << table2_header() << '\n';
  for (const auto& r : rows) {
    out << r.neuron << '\t' << tsv_safe(r.concepts.empty() ? kMissing : r.concepts) << '\t' << opt(r.tla_pct) << '\t'
        << opt(r.non_tla_pct) << '\t';
    if (r.stats) {
      const auto& s = *r.stats;
      out << fixed(s.target_median, 2) << '\t' << fixed(s.nontarget_median, 2) << '\t' << fixed(s.target_mean, 2)
          << '\t' << fixed(s.nontarget_mean, 2) << '\t' << format_z(s.z_score) << '\t' << format_p(s.p_value);
    } else {
      for (int i = 0; i < 6; ++i) out << (i ? "\t" : "") << kMissing;
    }
    out << '\t' << (r.reject_null ? (*r.reject_null ? "yes" : "no") : kMissing) << '\n';
  }
}

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, '\t')) out.push_back(field);
  if (!line.empty() && line.back() == '\t') out.emplace_back();
  return out;
}

inline void validate_table(std::istream& in, const std::string& name, const std::string& header,
                           const std::vector<std::regex>& columns) {
  std::string line;
  if (!std::getline(in, line) || line != header) throw Error(name + ": bad header");
  std::size_t line_no = 1;
  long previous = -1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_tabs(line);
    const auto where = name + ":" + std::to_string(line_no) + ": ";
    if (fields.size() != columns.size())
      throw Error(where + "expected " + std::to_string(columns.size()) + " columns, got " +
                  std::to_string(fields.size()));
    for (std::size_t c = 0; c < fields.size(); ++c)
      if (!std::regex_match(fields[c], columns[c])) throw Error(where + "bad value '" + fields[c] + "' in column " +
                                                                 std::to_string(c + 1));
    const long id = std::stol(fields[0]);
    if (id <= previous) throw Error(where + "neuron ids not strictly increasing");
    previous = id;
  }
}

}  // namespace detail

/// Strict re-parse of table1.tsv; throws Error on the first violation.
inline void validate_table1(std::istream& in) {
  const std::regex id("[0-9]+"), text("[^\t]+"), cov("NA|[01]\\.[0-9]{3}"), pct("NA|[0-9]{1,3}\\.[0-9]{2}");
  detail::validate_table(in, "table1.tsv", table1_header(), {id, text, cov, pct, pct});
}

inline void validate_table2(std::istream& in) {
  const std::regex id("[0-9]+"), text("[^\t]+"), pct("NA|[0-9]{1,3}\\.[0-9]{2}"), num("NA|[0-9]+\\.[0-9]{2}"),
      z("NA|-?[0-9]+\\.[0-9]{2}"), p("NA|<0\\.00001|[01]\\.[0-9]{5}"), verdict("NA|yes|no");
  detail::validate_table(in, "table2.tsv", table2_header(), {id, text, pct, pct, num, num, num, num, z, p, verdict});
}

}  // namespace conind
