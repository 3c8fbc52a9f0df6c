#include "sparsefolio/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace sparsefolio {

namespace {

struct Token {
  std::string_view text;
  int line;
  int column;
};

std::vector<Token> lex(std::string_view text, bool commas_separate) {
  std::vector<Token> tokens;
  int line = 1, column = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    const bool sep = c == ' ' || c == '\t' || c == '\r' || c == '\n' ||
                     (commas_separate && c == ',');
    if (sep) {
      if (c == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
      ++i;
      continue;
    }
    const int tok_line = line, tok_col = column;
    std::size_t start = i;
    while (i < text.size()) {
      const char d = text[i];
      if (d == ' ' || d == '\t' || d == '\r' || d == '\n' ||
          (commas_separate && d == ','))
        break;
      ++i;
      ++column;
    }
    tokens.push_back({text.substr(start, i - start), tok_line, tok_col});
  }
  return tokens;
}

double parse_double(const Token& t) {
  double value = 0;
  const char* begin = t.text.data();
  const char* end = begin + t.text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw parse_error("expected a number, got '" + std::string(t.text) + "'", t.line,
                      t.column);
  return value;
}

long parse_integer(const Token& t) {
  long value = 0;
  const char* begin = t.text.data();
  const char* end = begin + t.text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw parse_error("expected an integer, got '" + std::string(t.text) + "'", t.line,
                      t.column);
  return value;
}

const Token& need(const std::vector<Token>& tokens, std::size_t index,
                  const char* what) {
  if (index >= tokens.size()) {
    const int line = tokens.empty() ? 1 : tokens.back().line;
    const int col = tokens.empty() ? 1 : tokens.back().column;
    throw parse_error(std::string("unexpected end of input, expected ") + what, line,
                      col);
  }
  return tokens[index];
}

std::string format_sig6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

MarketDataset parse_orlibrary(std::string_view text, std::string name) {
  const auto tokens = lex(text, false);
  std::size_t pos = 0;

  const Token& n_tok = need(tokens, pos, "the asset count");
  const long n_long = parse_integer(n_tok);
  if (n_long < 1 || n_long > 100000)
    throw parse_error("asset count must be in [1, 100000]", n_tok.line, n_tok.column);
  const Index n = Index(n_long);
  ++pos;

  MarketDataset ds;
  ds.name = std::move(name);
  ds.n = n;
  ds.mean_returns.resize(n);
  ds.std_devs.resize(n);
  for (Index i = 0; i < n; ++i) {
    ds.mean_returns[i] = parse_double(need(tokens, pos++, "a mean return"));
    const Token& sd_tok = need(tokens, pos++, "a standard deviation");
    const double sd = parse_double(sd_tok);
    if (sd < 0)
      throw parse_error("standard deviation must be nonnegative", sd_tok.line,
                        sd_tok.column);
    ds.std_devs[i] = sd;
  }

  const double unset = std::numeric_limits<double>::quiet_NaN();
  ds.correlations = Matrix<double>::Constant(n, n, unset);
  while (pos < tokens.size()) {
    const Token& i_tok = tokens[pos];
    const long i = parse_integer(need(tokens, pos++, "a correlation row index"));
    const Token& j_tok = need(tokens, pos++, "a correlation column index");
    const long j = parse_integer(j_tok);
    const Token& c_tok = need(tokens, pos++, "a correlation value");
    const double corr = parse_double(c_tok);
    if (i < 1 || i > n)
      throw parse_error("correlation row index out of range", i_tok.line, i_tok.column);
    if (j < 1 || j > n)
      throw parse_error("correlation column index out of range", j_tok.line,
                        j_tok.column);
    if (std::abs(corr) > 1.0 + 1e-9)
      throw parse_error("correlation magnitude exceeds 1", c_tok.line, c_tok.column);
    if (i == j && std::abs(corr - 1.0) > 1e-9)
      throw parse_error("diagonal correlation must be 1", c_tok.line, c_tok.column);
    if (!std::isnan(ds.correlations(i - 1, j - 1)))
      throw parse_error("duplicate correlation entry", i_tok.line, i_tok.column);
    ds.correlations(i - 1, j - 1) = corr;
    ds.correlations(j - 1, i - 1) = corr;
  }

  const int end_line = tokens.empty() ? 1 : tokens.back().line;
  const int end_col = tokens.empty() ? 1 : tokens.back().column;
  for (Index i = 0; i < n; ++i)
    if (std::isnan(ds.correlations(i, i)))
      throw parse_error("missing diagonal correlation for asset " + std::to_string(i + 1),
                        end_line, end_col);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (std::isnan(ds.correlations(i, j))) ds.correlations(i, j) = 0.0;

  ds.covariance.resize(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) {
      const double cov = ds.correlations(i, j) * ds.std_devs[i] * ds.std_devs[j];
      ds.covariance(i, j) = cov;
      ds.covariance(j, i) = cov;
    }
  return ds;
}

MarketDataset parse_csv_covariance(std::string_view covariance_text,
                                   std::string_view returns_text, std::string name) {
  const auto cov_tokens = lex(covariance_text, true);
  std::size_t pos = 0;
  const Token& n_tok = need(cov_tokens, pos, "the asset count");
  const long n_long = parse_integer(n_tok);
  if (n_long < 1 || n_long > 100000)
    throw parse_error("asset count must be in [1, 100000]", n_tok.line, n_tok.column);
  const Index n = Index(n_long);
  ++pos;

  MarketDataset ds;
  ds.name = std::move(name);
  ds.n = n;
  ds.covariance.resize(n, n);
  std::vector<Token> entry_tokens;
  entry_tokens.reserve(std::size_t(n) * std::size_t(n));
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const Token& t = need(cov_tokens, pos++, "a covariance entry");
      entry_tokens.push_back(t);
      ds.covariance(i, j) = parse_double(t);
    }
  if (pos < cov_tokens.size())
    throw parse_error("unexpected trailing token '" + std::string(cov_tokens[pos].text) +
                          "'",
                      cov_tokens[pos].line, cov_tokens[pos].column);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (std::abs(ds.covariance(i, j) - ds.covariance(j, i)) > 1e-12) {
        const Token& t = entry_tokens[std::size_t(j) * std::size_t(n) + std::size_t(i)];
        throw parse_error("covariance is not symmetric at (" + std::to_string(j + 1) +
                              ", " + std::to_string(i + 1) + ")",
                          t.line, t.column);
      }

  const auto ret_tokens = lex(returns_text, true);
  if (ret_tokens.size() != std::size_t(n)) {
    const int line = ret_tokens.empty() ? 1 : ret_tokens.back().line;
    const int col = ret_tokens.empty() ? 1 : ret_tokens.back().column;
    throw parse_error("returns file must hold exactly " + std::to_string(n) +
                          " values, got " + std::to_string(ret_tokens.size()),
                      line, col);
  }
  ds.mean_returns.resize(n);
  for (Index i = 0; i < n; ++i)
    ds.mean_returns[i] = parse_double(ret_tokens[std::size_t(i)]);
  return ds;
}

MarketDataset embedded_simple_case() {
  MarketDataset ds;
  ds.name = "simple";
  ds.n = 6;
  ds.mean_returns.resize(6);
  ds.mean_returns << 0.021, 0.04, -0.034, -0.028, -0.005, 0.006;
  ds.covariance.resize(6, 6);
  ds.covariance << 0.038, 0.020, 0.017, 0.014, 0.019, 0.017,
                   0.020, 0.043, 0.015, 0.013, 0.021, 0.014,
                   0.017, 0.015, 0.034, 0.011, 0.014, 0.014,
                   0.014, 0.013, 0.011, 0.044, 0.014, 0.011,
                   0.019, 0.021, 0.014, 0.014, 0.040, 0.014,
                   0.017, 0.014, 0.014, 0.011, 0.014, 0.046;
  ds.std_devs = ds.covariance.diagonal().cwiseSqrt();
  ds.correlations.resize(6, 6);
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 6; ++j)
      ds.correlations(i, j) = ds.covariance(i, j) / (ds.std_devs[i] * ds.std_devs[j]);
  return ds;
}

std::string serialize_orlibrary(const MarketDataset& dataset) {
  const Index n = dataset.n;
  if (n < 1) throw contract_error("cannot serialize an empty dataset");

  Vector<double> sd = dataset.std_devs;
  Matrix<double> corr = dataset.correlations;
  if (!dataset.has_moments()) {
    sd = dataset.covariance.diagonal().cwiseSqrt();
    corr.resize(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) {
        const double denom = sd[i] * sd[j];
        corr(i, j) = denom > 0 ? dataset.covariance(i, j) / denom : (i == j ? 1.0 : 0.0);
      }
  }

  char buf[96];
  std::string out = std::to_string(n) + "\n";
  for (Index i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", dataset.mean_returns[i], sd[i]);
    out += buf;
  }
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) {
      std::snprintf(buf, sizeof buf, "%ld %ld %.17g\n", long(i + 1), long(j + 1),
                    corr(i, j));
      out += buf;
    }
  return out;
}

PortfolioProblem<double> make_problem(const MarketDataset& dataset, Index alpha,
                                      double rho) {
  if (dataset.n < 1) throw invalid_problem_error("dataset holds no assets");
  if (dataset.mean_returns.size() != dataset.n)
    throw invalid_problem_error("dataset return vector length does not match n");
  PortfolioProblem<double> problem;
  problem.n = dataset.n;
  problem.Q = dataset.covariance;
  problem.v = dataset.mean_returns;
  problem.up = Vector<double>::Ones(dataset.n);
  problem.rho = rho;
  problem.alpha = alpha;
  return problem;
}

ReportRow make_report_row(const SolveReport<double>& report, Index alpha, double rho,
                          bool include_timing) {
  ReportRow row;
  row.alpha = long(alpha);
  row.expected_return = report.expected_return;
  row.risk = report.risk;
  row.cardinality = report.cardinality;
  row.outer_iterations = report.outer_iterations;
  row.spg_iterations = report.spg_iterations;
  row.time_seconds = include_timing ? report.wall_time_seconds : 0.0;
  row.tau = report.final_tau;
  row.function_evaluations = report.function_evaluations;
  row.rho = rho;
  return row;
}

void write_report(const std::vector<ReportRow>& rows, ReportFormat format,
                  std::ostream& sink) {
  if (rows.empty()) throw contract_error("write_report requires at least one row");

  if (format == ReportFormat::csv) {
    const auto cell_d = [](const std::optional<double>& v) {
      return v ? format_sig6(*v) : std::string("NA");
    };
    const auto cell_l = [](const std::optional<long>& v) {
      return v ? std::to_string(*v) : std::string("NA");
    };
    sink << report_csv_header << "\n";
    for (const auto& r : rows)
      sink << r.alpha << ',' << cell_d(r.expected_return) << ',' << cell_d(r.risk) << ','
           << cell_l(r.cardinality) << ',' << cell_l(r.outer_iterations) << ','
           << cell_l(r.spg_iterations) << ',' << cell_d(r.time_seconds) << ','
           << cell_d(r.tau) << ',' << cell_l(r.function_evaluations) << ','
           << cell_d(r.rho) << "\n";
    return;
  }

  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  const auto put_d = [](nlohmann::ordered_json& o, const char* key,
                        const std::optional<double>& v) {
    if (v) o[key] = *v; else o[key] = nullptr;
  };
  const auto put_l = [](nlohmann::ordered_json& o, const char* key,
                        const std::optional<long>& v) {
    if (v) o[key] = *v; else o[key] = nullptr;
  };
  for (const auto& r : rows) {
    nlohmann::ordered_json o;
    o["alpha"] = r.alpha;
    put_d(o, "return", r.expected_return);
    put_d(o, "risk", r.risk);
    put_l(o, "card", r.cardinality);
    put_l(o, "iter", r.outer_iterations);
    put_l(o, "iter_spg", r.spg_iterations);
    put_d(o, "time_s", r.time_seconds);
    put_d(o, "tau", r.tau);
    put_l(o, "fcnt", r.function_evaluations);
    put_d(o, "rho", r.rho);
    arr.push_back(std::move(o));
  }
  sink << arr.dump(2) << "\n";
}

}  // namespace sparsefolio
