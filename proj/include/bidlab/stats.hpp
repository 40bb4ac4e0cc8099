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

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bidlab/errors.hpp"
#include "bidlab/experiment.hpp"

namespace bidlab {

// Outcome vector and regressor matrix; the first column of `x` is the
// constant and is named "Intercept".
struct DesignMatrix {
  std::string outcome;
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  std::vector<std::string> names;

  Eigen::Index observations() const { return x.rows(); }
  Eigen::Index parameters() const { return x.cols(); }
};

struct Coefficient {
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
  double t_stat = 0.0;
  double p_value = 1.0;
};

struct RegressionResult {
  std::string outcome;
  std::vector<Coefficient> coefficients;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd covariance;
  double r_squared = 0.0;
  double f_stat = std::numeric_limits<double>::quiet_NaN();
  double f_p_value = std::numeric_limits<double>::quiet_NaN();
  int df_model = 0;
  int df_resid = 0;
  int observations = 0;
  bool robust = true;

  // Throws std::out_of_range for unknown names.
  const Coefficient& operator[](std::string_view name) const;
};

// Rank threshold relative to the largest pivot, p * machine epsilon.
template <typename Scalar>
Scalar rank_threshold(Eigen::Index cols) {
  return static_cast<Scalar>(cols) * std::numeric_limits<Scalar>::epsilon();
}

// Column-pivoted Householder QR of X, with the rank threshold applied.
template <typename Derived>
auto pivoted_qr(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  qr.setThreshold(rank_threshold<Scalar>(x.cols()));
  return qr;
}

// (X'X)^-1 from the R factor of X P = Q R, without forming X'X.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> bread(
    const Eigen::ColPivHouseholderQR<
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>& qr) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index p = qr.cols();
  const Matrix r = qr.matrixR().topLeftCorner(p, p).template
                       triangularView<Eigen::Upper>();
  const Matrix r_inv = r.template triangularView<Eigen::Upper>().solve(
      Matrix::Identity(p, p));
  const Matrix permuted = r_inv * r_inv.transpose();
  return qr.colsPermutation() * permuted *
         qr.colsPermutation().transpose();
}

// HC1 sandwich: M/(M-p) * B X' diag(e^2) X B with B = (X'X)^-1.
template <typename DerivedX, typename DerivedE, typename DerivedB>
auto hc1_covariance(const Eigen::MatrixBase<DerivedX>& x,
                    const Eigen::MatrixBase<DerivedE>& residuals,
                    const Eigen::MatrixBase<DerivedB>& xtx_inv) {
  using Scalar = typename DerivedX::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const auto m = static_cast<Scalar>(x.rows());
  const auto p = static_cast<Scalar>(x.cols());
  const Matrix scaled = x.derived().array().colwise() *
                        residuals.derived().array().square();
  const Matrix meat = x.transpose() * scaled;
  return Matrix((m / (m - p)) * xtx_inv * meat * xtx_inv);
}

// Two-sided p values.
double student_t_p_value(double t, double df);
double normal_p_value(double z);
double f_p_value(double f, double df1, double df2);

// Least squares by pivoted QR. robust selects HC1 over the classical
// sigma^2 (X'X)^-1. Throws RankDeficientError naming the columns that add
// nothing to the span of the ones before them, DomainError when M <= p or
// inputs are non-finite.
RegressionResult ols(const DesignMatrix& dm, bool robust = true);

// Columns, left to right, that are linearly dependent on earlier columns.
std::vector<std::string> collinear_columns(const DesignMatrix& dm);

// Rows of `ds` that completed, in order.
std::vector<const TrialRecord*> usable_records(const Dataset& ds);

// Numeric view of a dataset column (covariate or outcome) over usable rows.
Eigen::VectorXd column(const Dataset& ds, std::string_view name);

DesignMatrix make_design_matrix(const Dataset& ds, std::string_view outcome,
                                std::span<const std::string> regressors);

struct SummaryRow {
  std::string name;
  int n = 0;
  double mean = 0.0;
  double std_dev = 0.0;
  double min = 0.0;
  double max = 0.0;
};

SummaryRow summarize_column(std::string_view name,
                            const Eigen::Ref<const Eigen::VectorXd>& v);

// Outcomes then covariates. Throws DomainError for an empty dataset.
std::vector<SummaryRow> summarize(const Dataset& ds);

// Covariates of the full model, in reporting order.
const std::vector<std::string>& covariate_names();
const std::vector<std::string>& outcome_names();

struct RegressionPair {
  RegressionResult on_design;
  RegressionResult on_all;
};

// bid2val, vol, episodes, each on design alone and on every covariate.
std::vector<RegressionPair> run_design_regressions(const Dataset& ds);

struct CateRow {
  std::string name;
  double point_estimate = 0.0;
  double std_error = 0.0;
  double zstat = 0.0;
  double pvalue = 1.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
};

struct CateResult {
  std::string outcome;
  std::string treatment;
  // One row per modifier, then "cate_intercept".
  std::vector<CateRow> rows;

  const CateRow& operator[](std::string_view name) const;
};

// Treatment-effect heterogeneity by fully interacted least squares:
//   Y ~ 1 + W + sum_j X_j + sum_j W X_j
// The W coefficient is the intercept of the conditional effect and each
// W X_j coefficient its slope in X_j. The baseline g(X) is restricted to be
// linear. HC1 errors, normal reference distribution, 95% intervals.
CateResult interacted_cate(const Dataset& ds, std::string_view outcome,
                           std::string_view treatment,
                           std::span<const std::string> modifiers);

struct BoxplotRow {
  std::string outcome;
  int design = 0;
  int n = 0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

// Linear-interpolation quantile of a sorted sample.
double quantile_sorted(std::span<const double> sorted, double q);

// Five-number summaries of each outcome within each design arm.
std::vector<BoxplotRow> boxplot_by_design(const Dataset& ds);

// Trailing mean over `window` values; the first window - 1 entries average
// everything seen so far.
std::vector<double> moving_average(std::span<const double> series,
                                   int window);

std::string significance_stars(double p);

// Regression pair in a two-column text table with significance stars.
std::string render_regression_table(const RegressionPair& pair);
void write_regression_csv(std::ostream& out, const RegressionPair& pair);
std::string render_summary_table(const std::vector<SummaryRow>& rows);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
std::string render_cate_table(const CateResult& cate);
void write_cate_csv(std::ostream& out, const CateResult& cate);
void write_boxplot_csv(std::ostream& out, const std::vector<BoxplotRow>& rows);

}  // namespace bidlab
