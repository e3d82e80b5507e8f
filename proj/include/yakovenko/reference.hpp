#ifndef YAKOVENKO_REFERENCE_HPP
#define YAKOVENKO_REFERENCE_HPP

#include <array>
#include <string>
#include <string_view>

#include "yakovenko/errors.hpp"
#include "yakovenko/params.hpp"

namespace yakovenko::reference {

// Reference EU household-income parameters (annual total gross household
// income, EUR) for 2005-2010 and their reported uncertainties.
struct YearRow {
  std::string_view year;
  Params params;
  Params errors;
};

// Params field order: t_low, t_high, m0, m1, alpha, alpha1.
inline constexpr std::array<YearRow, 6> eu_household_income{{
    {"2005", {36'000, 430'000, 155'000, 430'000, 2.907, 0.795}, {3'000, 50'000, 20'000, 50'000, 0.003, 0.009}},
    {"2006", {37'000, 445'000, 145'000, 445'000, 2.892, 0.86}, {3'000, 50'000, 20'000, 50'000, 0.004, 0.01}},
    {"2007", {37'000, 480'000, 160'000, 480'000, 2.735, 0.79}, {3'000, 50'000, 20'000, 50'000, 0.004, 0.01}},
    {"2008", {38'000, 450'000, 120'000, 450'000, 2.965, 0.890}, {3'000, 50'000, 20'000, 50'000, 0.001, 0.007}},
    {"2009", {37'000, 290'000, 145'000, 290'000, 2.974, 2.608}, {3'000, 50'000, 20'000, 50'000, 0.001, 0.006}},
    {"2010", {38'000, 450'000, 135'000, 450'000, 3.153, 0.77}, {3'000, 50'000, 20'000, 50'000, 0.002, 0.01}},
}};

inline const Params& year(std::string_view y) {
  for (const auto& row : eu_household_income) {
    if (row.year == y) return row.params;
  }
  throw domain_error("no reference row for year " + std::string(y));
}

}  // namespace yakovenko::reference

#endif  // YAKOVENKO_REFERENCE_HPP
