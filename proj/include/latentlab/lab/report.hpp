#pragma once

// Experiment reports: named metric tables, named pass/fail checks, and their
// on-disk form. Everything in the CSV files is a function of (scenario, seeds);
// wall-clock time only appears in summary.txt.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "latentlab/csv.hpp"
#include "latentlab/errors.hpp"

namespace latentlab::lab {

/// Bumped whenever a CSV column is added, removed or renamed.
inline constexpr int kFormatVersion = 1;

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct MetricTable {
  std::string name; ///< file stem
  CsvTable table;
};

struct ExperimentReport {
  std::string scenario;
  std::vector<std::uint64_t> seeds;
  std::vector<MetricTable> tables;
  std::vector<CheckResult> checks;
  double wall_seconds = 0.0;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  }

  void check(std::string name, bool ok, std::string detail = {}) {
    checks.push_back({std::move(name), ok, std::move(detail)});
  }

  void add_table(std::string name, CsvTable table) { tables.push_back({std::move(name), std::move(table)}); }

  const CheckResult* find_check(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }

  CsvTable checks_table() const {
    CsvTable t{{"check", "passed", "detail"}, {}};
    for (const auto& c : checks) t.add({c.name, c.passed ? "1" : "0", c.detail});
    return t;
  }
};

enum class OutputFormat { Csv, Txt };

/// Columns padded to equal width; for terminals and summary.txt.
inline std::string text_table(const CsvTable& t) {
  std::vector<std::size_t> width(t.header.size(), 0);
  auto widen = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) width[i] = std::max(width[i], r[i].size());
  };
  widen(t.header);
  for (const auto& r : t.rows) widen(r);
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) os << "  ";
      os << std::left << std::setw(i + 1 < r.size() ? static_cast<int>(width[i]) : 0) << r[i];
    }
    os << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  return os.str();
}

inline std::string summary_text(const ExperimentReport& report) {
  std::ostringstream os;
  os << "scenario " << report.scenario << ": " << (report.passed() ? "PASS" : "FAIL") << '\n';
  os << "seeds " << report.seeds.size();
  if (!report.seeds.empty()) os << " (" << report.seeds.front() << ".." << report.seeds.back() << ")";
  os << '\n';
  os << "format_version " << kFormatVersion << '\n';
  os << "wall_seconds " << std::fixed << std::setprecision(3) << report.wall_seconds << '\n';
  CsvTable checks{{"check", "result", "detail"}, {}};
  for (const auto& c : report.checks) checks.add({c.name, c.passed ? "pass" : "FAIL", c.detail});
  os << '\n' << text_table(checks);
  return os.str();
}

/// Writes <dir>/<scenario>/{<table>.csv, checks.csv, summary.txt}. In txt
/// format each table additionally gets an aligned <table>.txt.
inline void emit_report(const ExperimentReport& report, const std::filesystem::path& dir,
                        OutputFormat format = OutputFormat::Csv) {
  const auto target = dir / report.scenario;
  std::error_code ec;
  std::filesystem::create_directories(target, ec);
  if (ec) throw ConfigError("cannot create output directory " + target.string() + ": " + ec.message());
  auto write = [&](const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
    if (!out) throw ConfigError("error writing " + path.string());
  };
  for (const auto& t : report.tables) {
    write(target / (t.name + ".csv"), t.table.to_string());
    if (format == OutputFormat::Txt) write(target / (t.name + ".txt"), text_table(t.table));
  }
  write(target / "checks.csv", report.checks_table().to_string());
  write(target / "summary.txt", summary_text(report));
}

} // namespace latentlab::lab
