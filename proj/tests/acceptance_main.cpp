#include <cstdio>

#include "yolospp/checks/acceptance.hpp"

int main() {
  using namespace yolospp::checks;
  const AcceptanceOptions options;
  int failed = 0;
  for (const AcceptanceCheck& check : acceptance_checks()) {
    const CheckResult r = run_check(check, options);
    std::printf("%s\n", format_result_line(r).c_str());
    for (const auto& d : r.details) std::printf("    %s\n", d.c_str());
    std::fflush(stdout);
    failed += !r.passed;
  }
  std::printf("%d of %zu acceptance criteria passed\n", static_cast<int>(acceptance_checks().size()) - failed,
              acceptance_checks().size());
  return failed == 0 ? 0 : 1;
}
