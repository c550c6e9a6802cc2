//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <string>
#include <string_view>

namespace fmdock {

/// Bondi van der Waals radius in Angstrom. Throws DataError naming the
/// symbol if it is not in the table.
double vdw_radius(std::string_view symbol);

bool is_known_element(std::string_view symbol);

/// "CL" / "cl" -> "Cl"
std::string normalize_element(std::string_view symbol);

}  // namespace fmdock
