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

#include <array>
#include <charconv>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "agroval/errors.hpp"

namespace agroval {

/// Proleptic Gregorian calendar date. Arithmetic goes through a serial day
/// number (days since 1970-01-01) so ranges are cheap to iterate.
struct Date {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;    // 1..31

  auto operator<=>(const Date&) const = default;
};

constexpr bool is_leap_year(int y) {
  return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

constexpr int days_in_month(int year, int month) {
  constexpr std::array<int, 12> lengths = {31, 28, 31, 30, 31, 30,
                                           31, 31, 30, 31, 30, 31};
  if (month == 2 && is_leap_year(year)) return 29;
  return lengths[static_cast<std::size_t>(month - 1)];
}

constexpr bool is_valid_date(const Date& d) {
  return d.month >= 1 && d.month <= 12 && d.day >= 1 &&
         d.day <= days_in_month(d.year, d.month);
}

// Days since 1970-01-01 (Howard Hinnant's civil calendar algorithm).
constexpr std::int64_t to_serial(const Date& d) {
  const int y = d.year - (d.month <= 2 ? 1 : 0);
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = static_cast<unsigned>(
      (153 * (d.month + (d.month > 2 ? -3 : 9)) + 2) / 5 + d.day - 1);
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

constexpr Date from_serial(std::int64_t serial) {
  serial += 719468;
  const std::int64_t era = (serial >= 0 ? serial : serial - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(serial - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return Date{static_cast<int>(y + (m <= 2 ? 1 : 0)), static_cast<int>(m),
              static_cast<int>(d)};
}

constexpr Date add_days(const Date& d, std::int64_t n) {
  return from_serial(to_serial(d) + n);
}

/// ISO-8601 weekday, Monday = 1 .. Sunday = 7.
constexpr int iso_weekday(const Date& d) {
  const std::int64_t s = to_serial(d);  // 1970-01-01 was a Thursday
  return static_cast<int>(((s % 7) + 10) % 7 + 1);
}

constexpr int day_of_year(const Date& d) {
  return static_cast<int>(to_serial(d) - to_serial(Date{d.year, 1, 1})) + 1;
}

/// ISO week number together with the ISO week-based year (which may differ
/// from the calendar year near January 1st).
struct IsoWeek {
  int year;
  int week;  // 1..53
  auto operator<=>(const IsoWeek&) const = default;
};

constexpr IsoWeek iso_week(const Date& d) {
  // The Thursday of d's week determines the ISO year.
  const Date thursday = add_days(d, 4 - iso_weekday(d));
  const int week = (day_of_year(thursday) - 1) / 7 + 1;
  return IsoWeek{thursday.year, week};
}

constexpr int quarter_of(int month) { return (month - 1) / 3 + 1; }

inline std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

/// Parses strict ISO-8601 YYYY-MM-DD; anything else is a MalformedRow error
/// raised by the caller with row context, so this returns false on failure.
inline bool parse_date(std::string_view text, Date& out) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return false;
  auto parse_int = [](std::string_view s, int& v) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && p == s.data() + s.size();
  };
  Date d;
  if (!parse_int(text.substr(0, 4), d.year) ||
      !parse_int(text.substr(5, 2), d.month) ||
      !parse_int(text.substr(8, 2), d.day))
    return false;
  if (!is_valid_date(d)) return false;
  out = d;
  return true;
}

}  // namespace agroval
