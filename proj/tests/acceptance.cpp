// One PASS/FAIL line per acceptance criterion, in criterion order.

#include <algorithm>
#include <iostream>

#include "entrograph/acceptance.hpp"

int main() {
  using namespace entrograph::acceptance;
  Context ctx;
  std::vector<Outcome> outcomes;
  for (int id : suite_criteria("all")) {
    outcomes.push_back(run_criterion(id, ctx));
    std::cerr << "finished criterion " << id << "\n";
  }
  std::sort(outcomes.begin(), outcomes.end(), [](const Outcome& a, const Outcome& b) { return a.id < b.id; });
  std::size_t failed = 0;
  for (const auto& o : outcomes) {
    std::cout << outcome_line(o) << "\n";
    if (!o.pass) ++failed;
  }
  std::cout << (outcomes.size() - failed) << "/" << outcomes.size() << " criteria pass\n";
  return failed == 0 ? 0 : 1;
}
