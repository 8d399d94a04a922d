/*
 * Copyright 2026 the agroval authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "agroval/errors.hpp"
#include "agroval/indicators.hpp"
#include "agroval/stats.hpp"

namespace agroval {

/// Standardized indices are clamped here; the normal quantile function
/// diverges as the fitted CDF approaches 0 or 1.
inline constexpr double kStandardizedIndexClamp = 5.0;
inline constexpr int kMinReferenceValuesPerMonth = 20;

/// Gamma with a point mass at zero: H(x) = q + (1-q) G(x), fitted to the
/// nonzero values by L-moments (Hosking's rational-approximation estimator).
struct GammaZeroFit {
  double shape = 0.0;
  double scale = 0.0;
  double q_zero = 0.0;

  double cdf(double x) const {
    if (x <= 0.0) return q_zero;
    return q_zero + (1.0 - q_zero) * gamma_cdf_regularized(shape, x / scale);
  }
};

inline GammaZeroFit fit_gamma_zero_lmoments(const std::vector<double>& values) {
  std::vector<double> nonzero;
  nonzero.reserve(values.size());
  for (double v : values)
    if (v > 0.0) nonzero.push_back(v);
  const double n = static_cast<double>(values.size());
  GammaZeroFit fit;
  fit.q_zero = static_cast<double>(values.size() - nonzero.size()) / (n + 1.0);
  if (nonzero.size() < 3)
    throw Error::data("DegenerateFit",
                      "too few nonzero values for a gamma fit");
  const LMoments lm = sample_l_moments(nonzero);
  if (!(lm.l2 > 0.0))
    throw Error::data("DegenerateFit", "zero variance in reference values");
  const double t = lm.l2 / lm.l1;  // L-CV; in (0, 1) for positive data
  if (!(t > 0.0 && t < 1.0))
    throw Error::data("DegenerateFit", "L-CV outside (0, 1)");
  double alpha;
  if (t < 0.5) {
    const double z = 3.14159265358979323846 * t * t;
    alpha = (1.0 - 0.3080 * z) /
            (z * (1.0 + z * (-0.05812 + 0.01765 * z)));
  } else {
    const double z = 1.0 - t;
    alpha = z * (0.7213 - 0.5947 * z) /
            (1.0 + z * (-2.1817 + 1.2113 * z));
  }
  fit.shape = alpha;
  fit.scale = lm.l1 / alpha;
  return fit;
}

/// Three-parameter log-logistic in its generalized-logistic form
/// (k = -tau3), fitted exactly from the first three L-moments. Handles
/// negative values, so it backs the water-balance index.
struct LogLogisticFit {
  double location = 0.0;  // xi
  double scale = 1.0;     // alpha
  double shape = 0.0;     // k

  double cdf(double x) const {
    double y;
    if (std::fabs(shape) < 1e-12) {
      y = (x - location) / scale;
    } else {
      const double arg = 1.0 - shape * (x - location) / scale;
      if (arg <= 0.0) return shape > 0.0 ? 1.0 : 0.0;
      y = -std::log(arg) / shape;
    }
    return 1.0 / (1.0 + std::exp(-y));
  }
};

inline LogLogisticFit fit_loglogistic_lmoments(
    const std::vector<double>& values) {
  const LMoments lm = sample_l_moments(values);
  if (!(lm.l2 > 0.0))
    throw Error::data("DegenerateFit", "zero variance in reference values");
  constexpr double kPi = 3.14159265358979323846;
  LogLogisticFit fit;
  const double k = -lm.tau3();
  fit.shape = k;
  if (std::fabs(k) < 1e-9) {
    fit.scale = lm.l2;
    fit.location = lm.l1;
  } else {
    const double kpi = k * kPi;
    fit.scale = lm.l2 * std::sin(kpi) / kpi;
    fit.location = lm.l1 - fit.scale * (1.0 / k - kPi / std::sin(kpi));
  }
  return fit;
}

namespace detail {

struct MonthlyVector {
  int start_year;
  int start_month;
  std::vector<double> values;
};

/// Flattens a monthly IndicatorSeries into a contiguous vector; months must
/// be consecutive with no gaps.
inline MonthlyVector to_contiguous_monthly(const IndicatorSeries& series) {
  if (series.period_kind != PeriodKind::Monthly)
    throw Error::data("InvariantViolation",
                      "standardized indices need a monthly input series");
  if (series.values.empty())
    throw Error::data("EmptySeries", "no monthly values");
  MonthlyVector out;
  out.start_year = series.values.begin()->first.first;
  out.start_month = series.values.begin()->first.second;
  int expect_year = out.start_year;
  int expect_month = out.start_month;
  for (const auto& [key, value] : series.values) {
    if (key.first != expect_year || key.second != expect_month)
      throw Error::data("InvariantViolation",
                        "monthly series has a gap before " +
                            std::to_string(key.first) + "-" +
                            std::to_string(key.second));
    out.values.push_back(value);
    if (++expect_month == 13) {
      expect_month = 1;
      ++expect_year;
    }
  }
  return out;
}

template <typename FitT, typename Fitter>
IndicatorSeries standardize_monthly(const IndicatorSeries& input,
                                    const std::string& name, int scale_months,
                                    int ref_first_year, int ref_last_year,
                                    Fitter&& fitter) {
  if (scale_months < 1)
    throw Error::data("InvariantViolation", "scale must be >= 1 month");
  const MonthlyVector flat = to_contiguous_monthly(input);
  const int n = static_cast<int>(flat.values.size());

  // Rolling sums over `scale_months` ending at month index i.
  std::vector<double> sums(static_cast<std::size_t>(n),
                           std::numeric_limits<double>::quiet_NaN());
  double window = 0.0;
  for (int i = 0; i < n; ++i) {
    window += flat.values[static_cast<std::size_t>(i)];
    if (i >= scale_months)
      window -= flat.values[static_cast<std::size_t>(i - scale_months)];
    if (i >= scale_months - 1) sums[static_cast<std::size_t>(i)] = window;
  }

  const auto year_month_at = [&](int i) {
    const int months = flat.start_month - 1 + i;
    return std::pair<int, int>{flat.start_year + months / 12,
                               months % 12 + 1};
  };

  // Per calendar month, fit on the reference years then transform all.
  std::array<FitT, 12> fits{};
  std::array<bool, 12> fitted{};
  for (int month = 1; month <= 12; ++month) {
    std::vector<double> reference;
    for (int i = scale_months - 1; i < n; ++i) {
      const auto [y, m] = year_month_at(i);
      if (m == month && y >= ref_first_year && y <= ref_last_year)
        reference.push_back(sums[static_cast<std::size_t>(i)]);
    }
    if (reference.empty()) continue;
    if (static_cast<int>(reference.size()) < kMinReferenceValuesPerMonth)
      throw Error::data("InsufficientReference",
                        "calendar month " + std::to_string(month) + " has " +
                            std::to_string(reference.size()) +
                            " reference values, need >= " +
                            std::to_string(kMinReferenceValuesPerMonth));
    fits[static_cast<std::size_t>(month - 1)] = fitter(reference);
    fitted[static_cast<std::size_t>(month - 1)] = true;
  }

  IndicatorSeries out;
  out.region = input.region;
  out.indicator = name;
  out.period_kind = PeriodKind::Monthly;
  for (int i = scale_months - 1; i < n; ++i) {
    const auto [y, m] = year_month_at(i);
    if (!fitted[static_cast<std::size_t>(m - 1)]) continue;
    const double p =
        fits[static_cast<std::size_t>(m - 1)].cdf(sums[static_cast<std::size_t>(i)]);
    double z;
    if (p <= 0.0)
      z = -kStandardizedIndexClamp;
    else if (p >= 1.0)
      z = kStandardizedIndexClamp;
    else
      z = std::clamp(normal_quantile(p), -kStandardizedIndexClamp,
                     kStandardizedIndexClamp);
    out.values[{y, m}] = z;
  }
  return out;
}

}  // namespace detail

/// Standardized precipitation index at the given monthly scale. The gamma
/// (with zero mixing) is fitted per calendar month on the reference years;
/// every month in the input is then mapped through its month's fit.
inline IndicatorSeries spi(const IndicatorSeries& monthly_precip,
                           int scale_months, int ref_first_year,
                           int ref_last_year) {
  return detail::standardize_monthly<GammaZeroFit>(
      monthly_precip, "spi", scale_months, ref_first_year, ref_last_year,
      [](const std::vector<double>& ref) {
        return fit_gamma_zero_lmoments(ref);
      });
}

/// Standardized precipitation-evapotranspiration index over a monthly
/// climatic water balance (P - PET), three-parameter log-logistic fit.
inline IndicatorSeries spei(const IndicatorSeries& monthly_balance,
                            int scale_months, int ref_first_year,
                            int ref_last_year) {
  return detail::standardize_monthly<LogLogisticFit>(
      monthly_balance, "spei", scale_months, ref_first_year, ref_last_year,
      [](const std::vector<double>& ref) {
        return fit_loglogistic_lmoments(ref);
      });
}

}  // namespace agroval
