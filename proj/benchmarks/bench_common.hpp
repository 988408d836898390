#pragma once

#include <array>

#include "dhgmpc/case_study.hpp"

namespace dhgmpc::bench {

inline const CaseStudy& canonical() {
  static const CaseStudy cs = build_case_study(load_scenario(DHGMPC_CANONICAL));
  return cs;
}

inline const std::array<TerminalIngredients, 2>& terminals() {
  static const std::array<TerminalIngredients, 2> t = {
      synthesize_case_terminal(canonical(), 0),
      synthesize_case_terminal(canonical(), 1)};
  return t;
}

}  // namespace dhgmpc::bench
