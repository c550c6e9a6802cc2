//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#include "fmdock/elements.hpp"

#include <array>
#include <cctype>
#include <utility>

#include "fmdock/common.hpp"

namespace fmdock {

namespace {
// Bondi (1964); B, Al, Si and the metals from Mantina et al. (2009).
constexpr std::array<std::pair<std::string_view, double>, 22> kRadii { {
    { "H", 1.20 },  { "B", 1.92 },  { "C", 1.70 },  { "N", 1.55 },
    { "O", 1.52 },  { "F", 1.47 },  { "Na", 2.27 }, { "Mg", 1.73 },
    { "Al", 1.84 }, { "Si", 2.10 }, { "P", 1.80 },  { "S", 1.80 },
    { "Cl", 1.75 }, { "K", 2.75 },  { "Ca", 2.31 }, { "Fe", 2.04 },
    { "Zn", 1.39 }, { "Cu", 1.40 }, { "Se", 1.90 }, { "Br", 1.85 },
    { "I", 1.98 },  { "Mn", 2.05 },
} };

const double *find_radius(std::string_view symbol) {
  for (const auto &[sym, r]: kRadii)
    if (sym == symbol)
      return &r;
  return nullptr;
}
}  // namespace

std::string normalize_element(std::string_view symbol) {
  std::string out;
  for (char c: symbol) {
    if (std::isspace(static_cast<unsigned char>(c)))
      continue;
    out.push_back(out.empty()
                      ? static_cast<char>(std::toupper(
                            static_cast<unsigned char>(c)))
                      : static_cast<char>(std::tolower(
                            static_cast<unsigned char>(c))));
  }
  return out;
}

bool is_known_element(std::string_view symbol) {
  return find_radius(symbol) != nullptr;
}

double vdw_radius(std::string_view symbol) {
  const double *r = find_radius(symbol);
  if (r == nullptr)
    throw DataError("unknown element symbol: '" + std::string(symbol) + "'");
  return *r;
}

}  // namespace fmdock
