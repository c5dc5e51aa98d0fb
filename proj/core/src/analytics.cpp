#include "portalchoice/analytics.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>

#include "portalchoice/csv.hpp"
#include "portalchoice/features.hpp"

namespace portalchoice {

namespace {

bool is_dummy(const std::string& variable) {
  return variable.rfind("dummy:", 0) == 0;
}

// A value is usable for cross-household statistics when the household
// estimated it, it did not diverge to the bound, and (for brand dummies)
// the household shares the market reference base.
std::optional<double> eligible_value(const FitRecord& fit, std::size_t k,
                                     double beta_bound) {
  const double v = fit.coefficients[k];
  if (std::abs(v) >= beta_bound) return std::nullopt;
  if (is_dummy(fit.variables[k]) && fit.has_flag("local_base")) return std::nullopt;
  return v;
}

// Canonical variable order: the four covariates first, then the rest (brand
// dummies included) by how many households carry them, names breaking ties.
std::vector<std::string> variable_order(std::span<const FitRecord> fits) {
  std::map<std::string, std::size_t> counts;
  for (const auto& fit : fits)
    for (const auto& var : fit.variables) ++counts[var];
  std::vector<std::string> order;
  for (const char* name : kCovariateNames) {
    auto it = counts.find(name);
    if (it != counts.end()) {
      order.emplace_back(name);
      counts.erase(it);
    }
  }
  std::vector<std::pair<std::string, std::size_t>> rest(counts.begin(), counts.end());
  std::sort(rest.begin(), rest.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (const auto& [name, count] : rest) order.push_back(name);
  return order;
}

}  // namespace

SummaryResult summarize_coefficients(std::span<const FitRecord> fits,
                                     double beta_bound) {
  if (fits.empty()) throw std::invalid_argument("no fits to summarize");
  SummaryResult result;
  for (const auto& variable : variable_order(fits)) {
    CoefficientSummary row;
    row.variable = variable;
    std::vector<double> values;
    std::size_t sig_pos = 0, sig_neg = 0;
    const bool dummy = is_dummy(variable);
    for (const auto& fit : fits) {
      if (dummy && fit.has_flag("local_base")) continue;
      auto it = std::find(fit.variables.begin(), fit.variables.end(), variable);
      if (it == fit.variables.end()) continue;
      const auto k = static_cast<std::size_t>(it - fit.variables.begin());
      if (std::abs(fit.coefficients[k]) >= beta_bound) {
        ++row.n_divergent;
        continue;
      }
      values.push_back(fit.coefficients[k]);
      if (fit.se[k]) {
        if (fit.significance[k] > 0) ++sig_pos;
        if (fit.significance[k] < 0) ++sig_neg;
      }
    }
    row.n_households = values.size();
    if (row.n_households == 0 && row.n_divergent == 0) {
      result.warnings.push_back("variable " + variable + " present in no usable fit; omitted");
      continue;
    }
    if (!values.empty()) {
      const double n = static_cast<double>(values.size());
      double sum = 0.0;
      for (double v : values) sum += v;
      row.mean = sum / n;
      if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - row.mean) * (v - row.mean);
        row.sd = std::sqrt(ss / (n - 1.0));
      }
      row.se_of_mean = row.sd / std::sqrt(n);
      row.pct_sig_pos = 100.0 * static_cast<double>(sig_pos) / n;
      row.pct_sig_neg = 100.0 * static_cast<double>(sig_neg) / n;
    } else {
      row.mean = row.sd = row.se_of_mean = std::numeric_limits<double>::quiet_NaN();
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

CorrelationMatrix correlate(const CorrelationInput& input) {
  const std::size_t m = input.labels.size();
  if (input.values.size() != m)
    throw std::invalid_argument("labels/values size mismatch");
  CorrelationMatrix out;
  out.labels = input.labels;
  out.r = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(m),
                                    static_cast<Eigen::Index>(m),
                                    std::numeric_limits<double>::quiet_NaN());
  out.significant.assign(m, std::vector<char>(m, 0));
  out.n.assign(m, std::vector<int>(m, 0));

  for (std::size_t a = 0; a < m; ++a) {
    out.r(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)) = 1.0;
    out.n[a][a] = static_cast<int>(std::count_if(
        input.values[a].begin(), input.values[a].end(),
        [](const auto& v) { return v.has_value(); }));
    for (std::size_t b = 0; b < a; ++b) {
      const auto& va = input.values[a];
      const auto& vb = input.values[b];
      if (va.size() != vb.size())
        throw std::invalid_argument("ragged correlation input");
      // pairwise-complete observations
      double sum_a = 0.0, sum_b = 0.0;
      int n = 0;
      for (std::size_t i = 0; i < va.size(); ++i) {
        if (va[i] && vb[i]) {
          sum_a += *va[i];
          sum_b += *vb[i];
          ++n;
        }
      }
      out.n[a][b] = out.n[b][a] = n;
      if (n < 3) continue;  // unavailable
      const double mean_a = sum_a / n, mean_b = sum_b / n;
      double sab = 0.0, saa = 0.0, sbb = 0.0;
      for (std::size_t i = 0; i < va.size(); ++i) {
        if (va[i] && vb[i]) {
          const double da = *va[i] - mean_a;
          const double db = *vb[i] - mean_b;
          sab += da * db;
          saa += da * da;
          sbb += db * db;
        }
      }
      if (saa <= 0.0 || sbb <= 0.0) continue;  // a constant has no correlation
      double r = sab / std::sqrt(saa * sbb);
      r = std::clamp(r, -1.0, 1.0);
      out.r(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = r;
      out.r(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = r;

      // two-sided t-test at 95%: |r| sqrt((n-2)/(1-r^2)) > t_{0.975,n-2}
      bool sig;
      const double one_minus_r2 = 1.0 - r * r;
      if (one_minus_r2 <= 0.0) {
        sig = true;
      } else {
        const double t_stat = std::abs(r) * std::sqrt((n - 2) / one_minus_r2);
        boost::math::students_t dist(static_cast<double>(n - 2));
        sig = t_stat > boost::math::quantile(dist, 0.975);
      }
      out.significant[a][b] = out.significant[b][a] = sig ? 1 : 0;
    }
  }
  return out;
}

CorrelationInput coefficient_vectors(std::span<const FitRecord> fits,
                                     double beta_bound) {
  CorrelationInput input;
  input.labels = variable_order(fits);
  input.values.assign(input.labels.size(),
                      std::vector<std::optional<double>>(fits.size()));
  for (std::size_t l = 0; l < input.labels.size(); ++l) {
    for (std::size_t i = 0; i < fits.size(); ++i) {
      const auto& fit = fits[i];
      auto it = std::find(fit.variables.begin(), fit.variables.end(), input.labels[l]);
      if (it == fit.variables.end()) continue;
      input.values[l][i] =
          eligible_value(fit, static_cast<std::size_t>(it - fit.variables.begin()),
                         beta_bound);
    }
  }
  return input;
}

ScatterData scatter_data(std::span<const FitRecord> fits,
                         const std::string& var_x, const std::string& var_y,
                         double beta_bound) {
  ScatterData data;
  data.x_label = var_x;
  data.y_label = var_y;
  for (const auto& fit : fits) {
    auto ix = std::find(fit.variables.begin(), fit.variables.end(), var_x);
    auto iy = std::find(fit.variables.begin(), fit.variables.end(), var_y);
    if (ix == fit.variables.end() || iy == fit.variables.end()) continue;
    auto vx = eligible_value(fit, static_cast<std::size_t>(ix - fit.variables.begin()),
                             beta_bound);
    auto vy = eligible_value(fit, static_cast<std::size_t>(iy - fit.variables.begin()),
                             beta_bound);
    if (!vx || !vy) continue;
    data.household_ids.push_back(fit.household_id);
    data.x.push_back(*vx);
    data.y.push_back(*vy);
  }
  if (data.x.empty())
    throw std::invalid_argument("no household carries both '" + var_x + "' and '" +
                                var_y + "'");
  return data;
}

void write_summary_csv(std::ostream& out, const SummaryResult& summary) {
  out << "variable,mean,se_of_mean,sd,pct_sig_pos,pct_sig_neg,n_households,"
         "n_divergent\n";
  for (const auto& row : summary.rows) {
    auto cell = [](double v) {
      return std::isnan(v) ? std::string{} : csv::format_double(v);
    };
    out << row.variable << ',' << cell(row.mean) << ',' << cell(row.se_of_mean)
        << ',' << cell(row.sd) << ',' << cell(row.pct_sig_pos) << ','
        << cell(row.pct_sig_neg) << ',' << row.n_households << ','
        << row.n_divergent << '\n';
  }
}

void write_correlation_csv(std::ostream& out, const CorrelationMatrix& m) {
  out << "variable";
  for (const auto& label : m.labels) out << ',' << label;
  out << '\n';
  for (std::size_t a = 0; a < m.labels.size(); ++a) {
    out << m.labels[a];
    for (std::size_t b = 0; b < m.labels.size(); ++b) {
      const double r = m.r(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      out << ',';
      if (std::isnan(r)) continue;
      out << csv::format_double(r);
      if (m.significant[a][b]) out << '*';
    }
    out << '\n';
  }
  out << "# * significant at the 95% confidence level\n";
}

void write_scatter_points(std::ostream& out, const ScatterData& data) {
  out << "household_id," << data.x_label << ',' << data.y_label << '\n';
  for (std::size_t i = 0; i < data.x.size(); ++i)
    out << data.household_ids[i] << ',' << csv::format_double(data.x[i]) << ','
        << csv::format_double(data.y[i]) << '\n';
}

namespace {

struct Axis {
  double lo, hi;
  double scale(double v, double px_lo, double px_hi) const {
    return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo);
  }
};

Axis padded_axis(const std::vector<double>& values) {
  auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  double lo = *mn, hi = *mx;
  if (lo == hi) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace

void write_scatter_svg(std::ostream& out, const ScatterData& data) {
  constexpr double width = 640, height = 480;
  constexpr double left = 72, right = 20, top = 20, bottom = 56;
  const Axis ax = padded_axis(data.x);
  const Axis ay = padded_axis(data.y);

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' ' << height
      << "\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

  auto px = [&](double v) { return ax.scale(v, left, width - right); };
  auto py = [&](double v) { return ay.scale(v, height - bottom, top); };

  // axes with 5 ticks each
  out << "<g stroke=\"#333\" stroke-width=\"1\" fill=\"none\">\n";
  out << "<line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\""
      << width - right << "\" y2=\"" << height - bottom << "\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left
      << "\" y2=\"" << height - bottom << "\"/>\n";
  out << "</g>\n<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = ax.lo + (ax.hi - ax.lo) * i / 4.0;
    const double fy = ay.lo + (ay.hi - ay.lo) * i / 4.0;
    out << "<line x1=\"" << px(fx) << "\" y1=\"" << height - bottom << "\" x2=\""
        << px(fx) << "\" y2=\"" << height - bottom + 4
        << "\" stroke=\"#333\"/>\n";
    out << "<text x=\"" << px(fx) << "\" y=\"" << height - bottom + 16
        << "\" text-anchor=\"middle\">" << tick_label(fx) << "</text>\n";
    out << "<line x1=\"" << left - 4 << "\" y1=\"" << py(fy) << "\" x2=\"" << left
        << "\" y2=\"" << py(fy) << "\" stroke=\"#333\"/>\n";
    out << "<text x=\"" << left - 6 << "\" y=\"" << py(fy) + 4
        << "\" text-anchor=\"end\">" << tick_label(fy) << "</text>\n";
  }
  out << "<text x=\"" << (left + width - right) / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-size=\"13\">" << data.x_label
      << " coefficient</text>\n";
  out << "<text x=\"16\" y=\"" << (top + height - bottom) / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
      << (top + height - bottom) / 2 << ")\">" << data.y_label
      << " coefficient</text>\n";
  out << "</g>\n<g fill=\"#4682b4\" fill-opacity=\"0.6\">\n";
  for (std::size_t i = 0; i < data.x.size(); ++i)
    out << "<circle cx=\"" << px(data.x[i]) << "\" cy=\"" << py(data.y[i])
        << "\" r=\"2.5\"/>\n";
  out << "</g>\n</svg>\n";
}

CorrelationInput aggregates_correlation_input(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("aggregates file: no header");
  auto header = csv::split(line);
  if (header.size() < 2 || header[0] != "household_id")
    throw std::runtime_error("aggregates file: unexpected header");

  CorrelationInput input;
  input.labels.assign(header.begin() + 1, header.end());
  input.values.assign(input.labels.size(), {});
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto f = csv::split(line);
    if (f.size() != header.size())
      throw std::runtime_error("aggregates file line " + std::to_string(line_no) +
                               ": width mismatch");
    for (std::size_t c = 1; c < f.size(); ++c) {
      auto v = csv::parse_double(f[c]);
      if (!v)
        throw std::runtime_error("aggregates file line " + std::to_string(line_no) +
                                 ": malformed numeric field");
      input.values[c - 1].push_back(*v);
    }
  }
  return input;
}

}  // namespace portalchoice
