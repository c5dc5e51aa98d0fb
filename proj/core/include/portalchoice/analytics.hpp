#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "portalchoice/batch.hpp"

namespace portalchoice {

// Cross-household statistics for one variable. Divergent values (|b| at the
// bound) are excluded from the moments and tallied in n_divergent.
struct CoefficientSummary {
  std::string variable;
  double mean = 0.0;
  double se_of_mean = 0.0;  // sd / sqrt(n)
  double sd = 0.0;          // sample standard deviation
  double pct_sig_pos = 0.0;
  double pct_sig_neg = 0.0;
  std::size_t n_households = 0;  // values entering the moments
  std::size_t n_divergent = 0;
};

struct SummaryResult {
  std::vector<CoefficientSummary> rows;
  std::vector<std::string> warnings;  // variables omitted for lack of data
};

// Per-variable summaries across fitted households. Brand-dummy rows are
// restricted to households whose choice set contains the reference
// (no local_base flag), so all dummies share the same base.
SummaryResult summarize_coefficients(std::span<const FitRecord> fits,
                                     double beta_bound = 20.0);

// label x household table of optionally-present values.
struct CorrelationInput {
  std::vector<std::string> labels;
  std::vector<std::vector<std::optional<double>>> values;  // [label][household]
};

struct CorrelationMatrix {
  std::vector<std::string> labels;
  Eigen::MatrixXd r;                        // NaN where unavailable
  std::vector<std::vector<char>> significant;  // 95% two-sided t-test
  std::vector<std::vector<int>> n;          // pairwise-complete count
};

// Pearson correlations over pairwise-complete households; entries with
// overlap < 3 are marked unavailable (NaN, not significant).
CorrelationMatrix correlate(const CorrelationInput& input);

// Coefficient vectors for the Table-4 style matrix: per household and
// variable, present when estimated, non-divergent and (for dummies) based
// on the market reference.
CorrelationInput coefficient_vectors(std::span<const FitRecord> fits,
                                     double beta_bound = 20.0);

struct ScatterData {
  std::vector<std::string> household_ids;
  std::vector<double> x;
  std::vector<double> y;
  std::string x_label;
  std::string y_label;
};

// One point per household carrying both coefficients, divergent excluded.
// Throws std::invalid_argument when no household has both.
ScatterData scatter_data(std::span<const FitRecord> fits,
                         const std::string& var_x, const std::string& var_y,
                         double beta_bound = 20.0);

// variable,mean,se_of_mean,sd,pct_sig_pos,pct_sig_neg,n_households,n_divergent
void write_summary_csv(std::ostream& out, const SummaryResult& summary);

// Symmetric matrix; significant cells carry a trailing '*', unavailable
// cells are empty. A footnote comment line documents the mark.
void write_correlation_csv(std::ostream& out, const CorrelationMatrix& m);

void write_scatter_points(std::ostream& out, const ScatterData& data);
void write_scatter_svg(std::ostream& out, const ScatterData& data);

// Reads an aggregates table (household_id + numeric columns) into
// correlation input, labels in file column order.
CorrelationInput aggregates_correlation_input(std::istream& in);

}  // namespace portalchoice
