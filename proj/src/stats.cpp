// Copyright 2026 The bidlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bidlab/stats.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "bidlab/format.hpp"

namespace bidlab {
namespace {

constexpr double kZ975 = 1.959963984540054;

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

double covariate_value(const TrialRecord& r, std::string_view name) {
  const TrialConfig& c = r.config;
  if (name == "design") return design_code(c.design);
  if (name == "N") return c.num_bidders;
  if (name == "alpha") return c.alpha;
  if (name == "gamma") return c.gamma;
  if (name == "egreedy") return c.egreedy;
  if (name == "asynchronous") return c.asynchronous;
  if (name == "feedback") return c.feedback;
  if (name == "num_actions") return c.num_actions;
  if (name == "decay") return c.decay;
  if (name == "bid2val") return r.outcomes.bid2val;
  if (name == "vol") return r.outcomes.vol;
  if (name == "episodes") return r.outcomes.episodes;
  throw DomainError("unknown dataset column '" + std::string(name) + "'");
}

}  // namespace

const Coefficient& RegressionResult::operator[](std::string_view name) const {
  for (const auto& c : coefficients) {
    if (c.name == name) return c;
  }
  throw std::out_of_range("no coefficient named " + std::string(name));
}

const CateRow& CateResult::operator[](std::string_view name) const {
  for (const auto& r : rows) {
    if (r.name == name) return r;
  }
  throw std::out_of_range("no CATE row named " + std::string(name));
}

double student_t_p_value(double t, double df) {
  if (!std::isfinite(t)) return std::isnan(t) ? t : 0.0;
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

double normal_p_value(double z) {
  if (!std::isfinite(z)) return std::isnan(z) ? z : 0.0;
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

double f_p_value(double f, double df1, double df2) {
  if (!std::isfinite(f)) return std::isnan(f) ? f : 0.0;
  boost::math::fisher_f dist(df1, df2);
  return boost::math::cdf(boost::math::complement(dist, f));
}

std::vector<std::string> collinear_columns(const DesignMatrix& dm) {
  std::vector<std::string> out;
  std::vector<Eigen::Index> kept;
  for (Eigen::Index j = 0; j < dm.x.cols(); ++j) {
    kept.push_back(j);
    Eigen::MatrixXd sub(dm.x.rows(), static_cast<Eigen::Index>(kept.size()));
    for (std::size_t k = 0; k < kept.size(); ++k) sub.col(k) = dm.x.col(kept[k]);
    // Threshold as for the full fit so the two checks agree.
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sub);
    qr.setThreshold(rank_threshold<double>(dm.x.cols()));
    if (qr.rank() < sub.cols()) {
      out.push_back(dm.names[j]);
      kept.pop_back();
    }
  }
  return out;
}

RegressionResult ols(const DesignMatrix& dm, bool robust) {
  const Eigen::Index m = dm.observations();
  const Eigen::Index p = dm.parameters();
  if (dm.y.size() != m || static_cast<Eigen::Index>(dm.names.size()) != p) {
    throw DomainError("design matrix dimensions disagree");
  }
  if (m <= p) {
    throw DomainError("need more observations (" + std::to_string(m) +
                      ") than parameters (" + std::to_string(p) + ")");
  }
  if (!dm.x.allFinite() || !dm.y.allFinite()) {
    throw DomainError("design matrix holds non-finite values");
  }

  const auto qr = pivoted_qr(dm.x);
  if (qr.rank() < p) {
    auto cols = collinear_columns(dm);
    std::string what = "regressors are collinear:";
    for (const auto& c : cols) what += " " + c;
    throw RankDeficientError(what, std::move(cols));
  }

  const Eigen::VectorXd beta = qr.solve(dm.y);
  RegressionResult res;
  res.outcome = dm.outcome;
  res.residuals = dm.y - dm.x * beta;
  res.observations = static_cast<int>(m);
  res.df_resid = static_cast<int>(m - p);
  res.robust = robust;

  const double rss = res.residuals.squaredNorm();
  const double tss = (dm.y.array() - dm.y.mean()).square().sum();
  res.r_squared = tss > 0.0 ? std::clamp(1.0 - rss / tss, 0.0, 1.0) : 1.0;

  const Eigen::MatrixXd xtx_inv = bread(qr);
  res.covariance = robust ? hc1_covariance(dm.x, res.residuals, xtx_inv)
                          : Eigen::MatrixXd(rss / (m - p) * xtx_inv);

  // Classical overall F against the intercept-only model.
  res.df_model = static_cast<int>(p - 1);
  // Undefined for a constant outcome or an exact fit.
  if (res.df_model > 0 && rss > 0.0 && tss > 0.0) {
    res.f_stat = std::max(0.0, ((tss - rss) / res.df_model) /
                                   (rss / res.df_resid));
    res.f_p_value = f_p_value(res.f_stat, res.df_model, res.df_resid);
  }

  for (Eigen::Index j = 0; j < p; ++j) {
    Coefficient c;
    c.name = dm.names[j];
    c.estimate = beta[j];
    c.std_error = std::sqrt(std::max(res.covariance(j, j), 0.0));
    c.t_stat = c.estimate / c.std_error;
    c.p_value = student_t_p_value(c.t_stat, res.df_resid);
    res.coefficients.push_back(c);
  }
  return res;
}

std::vector<const TrialRecord*> usable_records(const Dataset& ds) {
  std::vector<const TrialRecord*> out;
  for (const auto& r : ds.records) {
    if (!r.failed) out.push_back(&r);
  }
  return out;
}

Eigen::VectorXd column(const Dataset& ds, std::string_view name) {
  const auto rows = usable_records(ds);
  Eigen::VectorXd v(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    v[i] = covariate_value(*rows[i], name);
  }
  return v;
}

DesignMatrix make_design_matrix(const Dataset& ds, std::string_view outcome,
                                std::span<const std::string> regressors) {
  DesignMatrix dm;
  dm.outcome = outcome;
  dm.y = column(ds, outcome);
  dm.x.resize(dm.y.size(), static_cast<Eigen::Index>(regressors.size()) + 1);
  dm.x.col(0).setOnes();
  dm.names.push_back("Intercept");
  for (std::size_t j = 0; j < regressors.size(); ++j) {
    dm.x.col(j + 1) = column(ds, regressors[j]);
    dm.names.push_back(regressors[j]);
  }
  return dm;
}

SummaryRow summarize_column(std::string_view name,
                            const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() == 0) throw DomainError("cannot summarize an empty column");
  SummaryRow row;
  row.name = name;
  row.n = static_cast<int>(v.size());
  row.mean = v.mean();
  row.std_dev = v.size() > 1 ? std::sqrt((v.array() - row.mean).square().sum() /
                                         (v.size() - 1))
                             : 0.0;
  row.min = v.minCoeff();
  row.max = v.maxCoeff();
  return row;
}

const std::vector<std::string>& outcome_names() {
  static const std::vector<std::string> names = {"bid2val", "episodes", "vol"};
  return names;
}

const std::vector<std::string>& covariate_names() {
  static const std::vector<std::string> names = {
      "N",        "alpha",  "asynchronous", "decay",      "design",
      "egreedy",  "feedback", "gamma",      "num_actions"};
  return names;
}

std::vector<SummaryRow> summarize(const Dataset& ds) {
  if (usable_records(ds).empty()) {
    throw DomainError("cannot summarize an empty dataset");
  }
  static const std::vector<std::string> order = {
      "bid2val", "episodes", "vol",    "N",        "alpha",      "gamma",
      "egreedy", "asynchronous", "design", "feedback", "num_actions", "decay"};
  std::vector<SummaryRow> rows;
  for (const auto& name : order) {
    rows.push_back(summarize_column(name, column(ds, name)));
  }
  return rows;
}

std::vector<RegressionPair> run_design_regressions(const Dataset& ds) {
  const std::vector<std::string> design_only = {"design"};
  std::vector<RegressionPair> out;
  for (const char* y : {"bid2val", "vol", "episodes"}) {
    RegressionPair pair;
    pair.on_design = ols(make_design_matrix(ds, y, design_only));
    pair.on_all = ols(make_design_matrix(ds, y, covariate_names()));
    out.push_back(std::move(pair));
  }
  return out;
}

CateResult interacted_cate(const Dataset& ds, std::string_view outcome,
                           std::string_view treatment,
                           std::span<const std::string> modifiers) {
  const Eigen::VectorXd w = column(ds, treatment);
  if (!((w.array() == 0.0) || (w.array() == 1.0)).all()) {
    throw DomainError("treatment '" + std::string(treatment) +
                      "' must be binary");
  }
  for (const auto& m : modifiers) {
    if (m == treatment) {
      throw DomainError("the treatment cannot also be a modifier");
    }
  }

  const auto k = static_cast<Eigen::Index>(modifiers.size());
  DesignMatrix dm;
  dm.outcome = outcome;
  dm.y = column(ds, outcome);
  dm.x.resize(dm.y.size(), 2 + 2 * k);
  dm.x.col(0).setOnes();
  dm.x.col(1) = w;
  dm.names = {"Intercept", std::string(treatment)};
  for (Eigen::Index j = 0; j < k; ++j) {
    const Eigen::VectorXd xj = column(ds, modifiers[j]);
    dm.x.col(2 + j) = xj;
    dm.x.col(2 + k + j) = w.cwiseProduct(xj);
    dm.names.push_back(modifiers[j]);
  }
  for (Eigen::Index j = 0; j < k; ++j) {
    dm.names.push_back(std::string(treatment) + ":" + modifiers[j]);
  }

  const RegressionResult fit = ols(dm, true);
  auto row = [](std::string name, const Coefficient& c) {
    CateRow r;
    r.name = std::move(name);
    r.point_estimate = c.estimate;
    r.std_error = c.std_error;
    r.zstat = c.estimate / c.std_error;
    r.pvalue = normal_p_value(r.zstat);
    r.ci_lower = c.estimate - kZ975 * c.std_error;
    r.ci_upper = c.estimate + kZ975 * c.std_error;
    return r;
  };

  CateResult out;
  out.outcome = outcome;
  out.treatment = treatment;
  for (Eigen::Index j = 0; j < k; ++j) {
    out.rows.push_back(row(modifiers[j], fit.coefficients[2 + k + j]));
  }
  out.rows.push_back(row("cate_intercept", fit.coefficients[1]));
  return out;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DomainError("quantile of an empty sample");
  const double h = (sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
}

std::vector<BoxplotRow> boxplot_by_design(const Dataset& ds) {
  std::vector<BoxplotRow> out;
  const Eigen::VectorXd design = column(ds, "design");
  for (const char* y : {"bid2val", "vol", "episodes"}) {
    const Eigen::VectorXd v = column(ds, y);
    for (int arm : {0, 1}) {
      std::vector<double> xs;
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (design[i] == arm) xs.push_back(v[i]);
      }
      if (xs.empty()) continue;
      std::sort(xs.begin(), xs.end());
      out.push_back({y, arm, static_cast<int>(xs.size()), xs.front(),
                     quantile_sorted(xs, 0.25), quantile_sorted(xs, 0.5),
                     quantile_sorted(xs, 0.75), xs.back()});
    }
  }
  return out;
}

std::vector<double> moving_average(std::span<const double> series,
                                   int window) {
  if (window < 1) throw DomainError("moving-average window must be positive");
  std::vector<double> out(series.size());
  double sum = 0.0;
  for (std::size_t t = 0; t < series.size(); ++t) {
    sum += series[t];
    if (t >= static_cast<std::size_t>(window)) sum -= series[t - window];
    const std::size_t n = std::min<std::size_t>(t + 1, window);
    out[t] = sum / n;
  }
  return out;
}

std::string significance_stars(double p) {
  if (!(p < 0.1)) return "";
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  return "*";
}

std::string render_regression_table(const RegressionPair& pair) {
  const RegressionResult* models[2] = {&pair.on_design, &pair.on_all};
  std::vector<std::string> names = {"Intercept"};
  for (const auto& c : pair.on_all.coefficients) {
    if (c.name != "Intercept") names.push_back(c.name);
  }

  auto cell = [](const RegressionResult& r, const std::string& name) {
    for (const auto& c : r.coefficients) {
      if (c.name == name) {
        return fixed(c.estimate) + significance_stars(c.p_value) + " (" +
               fixed(c.std_error) + ")";
      }
    }
    return std::string();
  };

  std::ostringstream os;
  const std::string rule(78, '=');
  os << rule << '\n'
     << "Dependent variable: " << pair.on_all.outcome << '\n'
     << std::left << std::setw(16) << "" << std::setw(31) << "(1)"
     << "(2)" << '\n'
     << std::string(78, '-') << '\n';
  for (const auto& n : names) {
    os << std::setw(16) << n << std::setw(31) << cell(*models[0], n)
       << cell(*models[1], n) << '\n';
  }
  os << std::string(78, '-') << '\n';
  os << std::setw(16) << "Observations" << std::setw(31)
     << models[0]->observations << models[1]->observations << '\n';
  os << std::setw(16) << "R^2" << std::setw(31) << fixed(models[0]->r_squared)
     << fixed(models[1]->r_squared) << '\n';
  auto f = [](const RegressionResult& r) {
    return fixed(r.f_stat) + significance_stars(r.f_p_value) + " (df = " +
           std::to_string(r.df_model) + "; " + std::to_string(r.df_resid) +
           ")";
  };
  os << std::setw(16) << "F Statistic" << std::setw(31) << f(*models[0])
     << f(*models[1]) << '\n';
  os << rule << '\n'
     << "Robust (HC1) standard errors in parentheses. "
        "* p<0.1; ** p<0.05; *** p<0.01\n";
  return os.str();
}

void write_regression_csv(std::ostream& out, const RegressionPair& pair) {
  out << "outcome,model,term,estimate,std_error,t_stat,p_value,r_squared,"
         "f_stat,df_model,df_resid,observations\n";
  int model = 1;
  for (const RegressionResult* r : {&pair.on_design, &pair.on_all}) {
    for (const auto& c : r->coefficients) {
      out << r->outcome << ',' << model << ',' << c.name << ','
          << format_double(c.estimate) << ',' << format_double(c.std_error)
          << ',' << format_double(c.t_stat) << ','
          << format_double(c.p_value) << ',' << format_double(r->r_squared)
          << ',' << format_double(r->f_stat) << ',' << r->df_model << ','
          << r->df_resid << ',' << r->observations << '\n';
    }
    ++model;
  }
}

std::string render_summary_table(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(14) << "Variable" << std::right << std::setw(6)
     << "N" << std::setw(16) << "Mean" << std::setw(16) << "St. Dev."
     << std::setw(14) << "Min" << std::setw(14) << "Max" << '\n'
     << std::string(80, '-') << '\n';
  for (const auto& r : rows) {
    const int digits = r.name == "decay" ? 5 : 3;
    os << std::left << std::setw(14) << r.name << std::right << std::setw(6)
       << r.n << std::setw(16) << fixed(r.mean, digits) << std::setw(16)
       << fixed(r.std_dev, digits) << std::setw(14) << fixed(r.min, digits)
       << std::setw(14) << fixed(r.max, digits) << '\n';
  }
  return os.str();
}

void write_summary_csv(std::ostream& out,
                       const std::vector<SummaryRow>& rows) {
  out << "variable,n,mean,std_dev,min,max\n";
  for (const auto& r : rows) {
    out << r.name << ',' << r.n << ',' << format_double(r.mean) << ','
        << format_double(r.std_dev) << ',' << format_double(r.min) << ','
        << format_double(r.max) << '\n';
  }
}

std::string render_cate_table(const CateResult& cate) {
  std::ostringstream os;
  os << "Conditional effect of " << cate.treatment << " on " << cate.outcome
     << " (fully interacted OLS, linear baseline, HC1)\n"
     << std::left << std::setw(16) << "" << std::right;
  for (const char* h : {"point_estimate", "stderr", "zstat", "pvalue",
                        "ci_lower", "ci_upper"}) {
    os << std::setw(16) << h;
  }
  os << '\n';
  for (const auto& r : cate.rows) {
    os << std::left << std::setw(16) << r.name << std::right;
    for (double v : {r.point_estimate, r.std_error, r.zstat, r.pvalue,
                     r.ci_lower, r.ci_upper}) {
      os << std::setw(16) << fixed(v);
    }
    os << '\n';
  }
  return os.str();
}

void write_cate_csv(std::ostream& out, const CateResult& cate) {
  out << "# conditional effect of " << cate.treatment << " on "
      << cate.outcome
      << " by fully interacted OLS with a linear baseline; HC1 errors\n";
  out << "term,point_estimate,stderr,zstat,pvalue,ci_lower,ci_upper\n";
  for (const auto& r : cate.rows) {
    out << r.name << ',' << format_double(r.point_estimate) << ','
        << format_double(r.std_error) << ',' << format_double(r.zstat) << ','
        << format_double(r.pvalue) << ',' << format_double(r.ci_lower) << ','
        << format_double(r.ci_upper) << '\n';
  }
}

void write_boxplot_csv(std::ostream& out, const std::vector<BoxplotRow>& rows) {
  out << "outcome,design,n,min,q1,median,q3,max\n";
  for (const auto& r : rows) {
    out << r.outcome << ',' << r.design << ',' << r.n << ','
        << format_double(r.min) << ',' << format_double(r.q1) << ','
        << format_double(r.median) << ',' << format_double(r.q3) << ','
        << format_double(r.max) << '\n';
  }
}

}  // namespace bidlab
