#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sparsefolio/portfolio.hpp"
#include "sparsefolio/pspgd.hpp"

namespace sparsefolio {

// A market instance in moment form (means, stddevs, correlations) or
// covariance form; `covariance` is always populated.
struct MarketDataset {
  std::string name;
  Index n = 0;
  Vector<double> mean_returns;
  Vector<double> std_devs;       // size 0 for covariance-form input
  Matrix<double> correlations;   // size 0 for covariance-form input
  Matrix<double> covariance;

  bool has_moments() const { return std_devs.size() == n && n > 0; }
};

// Grammar: asset count n; n pairs (mean, stddev); then (i, j, corr) triples
// with 1-based indices. Whitespace-separated, line breaks insignificant.
// Unlisted off-diagonal correlations default to 0; the diagonal must be
// listed. Throws parse_error with the offending line/column.
MarketDataset parse_orlibrary(std::string_view text, std::string name = "orlibrary");

// Covariance file: first token n, then n rows of n values. Returns file: n
// values. Commas and whitespace both separate tokens. The covariance must be
// symmetric to 1e-12.
MarketDataset parse_csv_covariance(std::string_view covariance_text,
                                   std::string_view returns_text,
                                   std::string name = "csv");

// The embedded 6-asset example instance.
MarketDataset embedded_simple_case();

// Canonical OR-Library text for a dataset: full upper triangle, 17 significant
// digits, so parse(serialize(d)) reproduces d's covariance bit for bit.
std::string serialize_orlibrary(const MarketDataset& dataset);

PortfolioProblem<double> make_problem(const MarketDataset& dataset, Index alpha,
                                      double rho);

// One output row; unset fields render as NA (CSV) / null (JSON).
struct ReportRow {
  long alpha = 0;
  std::optional<double> expected_return;
  std::optional<double> risk;
  std::optional<long> cardinality;
  std::optional<long> outer_iterations;
  std::optional<long> spg_iterations;
  std::optional<double> time_seconds;
  std::optional<double> tau;
  std::optional<long> function_evaluations;
  std::optional<double> rho;
};

ReportRow make_report_row(const SolveReport<double>& report, Index alpha, double rho,
                          bool include_timing = true);

enum class ReportFormat { csv, json };

inline constexpr const char* report_csv_header =
    "alpha,return,risk,card,iter,iter_spg,time_s,tau,fcnt,rho";

// CSV: pinned header, 6 significant digits, LF endings. JSON: array of
// objects, snake_case keys, full double precision.
void write_report(const std::vector<ReportRow>& rows, ReportFormat format,
                  std::ostream& sink);

}  // namespace sparsefolio
