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
#include <cmath>

namespace agroval {

/// One day of inputs for reference evapotranspiration. Radiation is incoming
/// shortwave in MJ/m^2/day; wind is the 2 m speed in m/s; humidity in %.
struct PetDay {
  double tmean;
  double tmax;
  double tmin;
  double wind;
  double radiation;
  double rhum;
};

/// Saturation vapour pressure (kPa) at air temperature T (deg C).
inline double saturation_vapor_pressure(double t) {
  return 0.6108 * std::exp(17.27 * t / (t + 237.3));
}

/// Daily reference-crop evapotranspiration (mm/day), FAO-56 Penman-Monteith
/// with soil heat flux G = 0 at the daily step. Extraterrestrial radiation
/// follows from latitude and day of year; the clear-sky ratio is clamped to
/// [0, 1] and the result floored at zero.
inline double pet_penman_monteith(const PetDay& day, double latitude_deg,
                                  int day_of_year, double elevation_m) {
  constexpr double kPi = 3.14159265358979323846;
  const double t = day.tmean;

  // Vapour pressure terms (kPa).
  const double es =
      0.5 * (saturation_vapor_pressure(day.tmax) +
             saturation_vapor_pressure(day.tmin));
  const double ea = day.rhum / 100.0 * es;
  const double slope =
      4098.0 * saturation_vapor_pressure(t) / ((t + 237.3) * (t + 237.3));

  // Psychrometric constant from elevation-adjusted pressure.
  const double pressure =
      101.3 * std::pow((293.0 - 0.0065 * elevation_m) / 293.0, 5.26);
  const double gamma = 0.665e-3 * pressure;

  // Extraterrestrial and clear-sky radiation (MJ/m^2/day).
  const double phi = latitude_deg * kPi / 180.0;
  const double dr = 1.0 + 0.033 * std::cos(2.0 * kPi * day_of_year / 365.0);
  const double decl = 0.409 * std::sin(2.0 * kPi * day_of_year / 365.0 - 1.39);
  const double cos_omega = -std::tan(phi) * std::tan(decl);
  const double omega_s = std::acos(std::clamp(cos_omega, -1.0, 1.0));
  const double ra = 24.0 * 60.0 / kPi * 0.0820 * dr *
                    (omega_s * std::sin(phi) * std::sin(decl) +
                     std::cos(phi) * std::cos(decl) * std::sin(omega_s));
  const double rso = (0.75 + 2e-5 * elevation_m) * ra;

  // Net radiation: shortwave with albedo 0.23, longwave per FAO-56 eq. 39.
  const double rns = (1.0 - 0.23) * day.radiation;
  const double ratio = rso > 0.0 ? std::clamp(day.radiation / rso, 0.0, 1.0)
                                 : 0.0;
  constexpr double kStefanBoltzmann = 4.903e-9;  // MJ K^-4 m^-2 day^-1
  const double tmax_k = day.tmax + 273.16;
  const double tmin_k = day.tmin + 273.16;
  const double rnl = kStefanBoltzmann * 0.5 *
                     (tmax_k * tmax_k * tmax_k * tmax_k +
                      tmin_k * tmin_k * tmin_k * tmin_k) *
                     (0.34 - 0.14 * std::sqrt(std::max(ea, 0.0))) *
                     (1.35 * ratio - 0.35);
  const double rn = rns - rnl;

  const double numerator =
      0.408 * slope * rn +
      gamma * 900.0 / (t + 273.0) * day.wind * (es - ea);
  const double denominator = slope + gamma * (1.0 + 0.34 * day.wind);
  return std::max(0.0, numerator / denominator);
}

}  // namespace agroval
