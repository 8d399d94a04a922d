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
#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "agroval/pet.hpp"

using namespace agroval;

namespace {

/// Independent step-by-step reference computation, written separately from
/// the implementation and kept deliberately verbose: each named quantity
/// follows the standard daily reference-evapotranspiration worksheet, with
/// mean relative humidity supplying the actual vapour pressure.
double reference_et0(double tmax, double tmin, double rh_mean, double u2,
                     double rs, double lat_deg, int julian_day,
                     double elev_m) {
  const double pi = std::acos(-1.0);
  const double tmean = (tmax + tmin) / 2.0;

  // Step 1: vapour pressures.
  const auto svp = [](double temp) {
    return 0.6108 * std::exp(17.27 * temp / (temp + 237.3));
  };
  const double e_tmax = svp(tmax);
  const double e_tmin = svp(tmin);
  const double e_s = (e_tmax + e_tmin) / 2.0;
  const double e_a = rh_mean / 100.0 * e_s;

  // Step 2: slope of the vapour pressure curve and psychrometric constant.
  const double big_delta =
      4098.0 * svp(tmean) / std::pow(tmean + 237.3, 2.0);
  const double pressure =
      101.3 * std::pow((293.0 - 0.0065 * elev_m) / 293.0, 5.26);
  const double psy = 0.000665 * pressure;

  // Step 3: extraterrestrial, clear-sky and net radiation.
  const double lat = lat_deg * pi / 180.0;
  const double inv_dist = 1.0 + 0.033 * std::cos(2.0 * pi * julian_day / 365.0);
  const double declination =
      0.409 * std::sin(2.0 * pi * julian_day / 365.0 - 1.39);
  const double sunset_angle =
      std::acos(-std::tan(lat) * std::tan(declination));
  const double r_a =
      (24.0 * 60.0 / pi) * 0.0820 * inv_dist *
      (sunset_angle * std::sin(lat) * std::sin(declination) +
       std::cos(lat) * std::cos(declination) * std::sin(sunset_angle));
  const double r_so = (0.75 + 2e-5 * elev_m) * r_a;
  const double r_ns = (1.0 - 0.23) * rs;
  const double relative_shortwave = std::min(1.0, rs / r_so);
  const double r_nl =
      4.903e-9 *
      (std::pow(tmax + 273.16, 4.0) + std::pow(tmin + 273.16, 4.0)) / 2.0 *
      (0.34 - 0.14 * std::sqrt(e_a)) * (1.35 * relative_shortwave - 0.35);
  const double r_n = r_ns - r_nl;

  // Step 4: combination equation, G = 0 at the daily step.
  const double radiation_term = 0.408 * big_delta * r_n;
  const double wind_term =
      psy * (900.0 / (tmean + 273.0)) * u2 * (e_s - e_a);
  return (radiation_term + wind_term) /
         (big_delta + psy * (1.0 + 0.34 * u2));
}

}  // namespace

TEST_CASE("mid-latitude summer day matches the worksheet computation") {
  // 6 July (day 187) at 50.80 N, 100 m: Tmax 21.5, Tmin 12.3, mean RH 73.5%,
  // u2 = 2.78 m/s, Rs = 22.07 MJ/m^2/day.
  const PetDay day{16.9, 21.5, 12.3, 2.78, 22.07, 73.5};
  const double got = pet_penman_monteith(day, 50.80, 187, 100.0);
  const double expected =
      reference_et0(21.5, 12.3, 73.5, 2.78, 22.07, 50.80, 187, 100.0);
  REQUIRE(got == Catch::Approx(expected).margin(1e-3));
  REQUIRE(got == Catch::Approx(3.853367).margin(1e-3));
  // The published book value for these inputs (with vapour pressure from
  // RHmax/RHmin rather than the mean) is 3.88 mm/day.
  REQUIRE(std::fabs(got - 3.88) < 0.1);
}

TEST_CASE("vanishing net radiation, wind, and vapour terms give zero") {
  // With Rs = 0 the longwave factor (0.34 - 0.14 sqrt(ea)) is tuned to zero
  // via the humidity, so Rn = 0; wind = 0 removes the aerodynamic term.
  const double t = 40.0;
  const double es = saturation_vapor_pressure(t);
  const double ea_target = (0.34 / 0.14) * (0.34 / 0.14);
  const double rhum = 100.0 * ea_target / es;
  REQUIRE(rhum <= 100.0);
  const PetDay day{t, t, t, 0.0, 0.0, rhum};
  REQUIRE(pet_penman_monteith(day, 51.0, 187, 100.0) ==
          Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("PET grows strictly with the vapour pressure deficit") {
  // Halving relative humidity at fixed radiation and wind doubles the
  // deficit; the aerodynamic term must push PET strictly up.
  const PetDay humid{18.0, 24.0, 12.0, 2.0, 20.0, 80.0};
  const PetDay dry{18.0, 24.0, 12.0, 2.0, 20.0, 60.0};
  const PetDay drier{18.0, 24.0, 12.0, 2.0, 20.0, 40.0};
  const double a = pet_penman_monteith(humid, 51.0, 187, 100.0);
  const double b = pet_penman_monteith(dry, 51.0, 187, 100.0);
  const double c = pet_penman_monteith(drier, 51.0, 187, 100.0);
  REQUIRE(a >= 0.0);
  REQUIRE(b > a);
  REQUIRE(c > b);
}

TEST_CASE("PET never goes negative") {
  // A cold, dark, saturated winter day would drive the raw equation
  // negative; the result is floored at zero.
  const PetDay day{-5.0, -2.0, -8.0, 1.0, 0.5, 100.0};
  REQUIRE(pet_penman_monteith(day, 51.0, 15, 100.0) >= 0.0);
}
