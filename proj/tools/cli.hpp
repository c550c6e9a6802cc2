//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <iosfwd>

namespace fmdock {

/// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure. On
/// failure a one-line JSON error record goes to `err`.
int run_cli(int argc, const char *const *argv, std::ostream &out,
            std::ostream &err);

}  // namespace fmdock
