#pragma once

// Invariant suite run by `selfcheck`.

#include <string>
#include <vector>

namespace reslab::selfcheck {

struct CheckResult {
    std::string name;
    double value = 0.0;      // measured defect
    double tolerance = 0.0;
    bool passed = false;
    std::string detail;
};

std::vector<CheckResult> run_all();

bool all_passed(const std::vector<CheckResult>& results);

} // namespace reslab::selfcheck
