#include "gspr/error.hpp"

namespace gspr {

int exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const NumericError*>(&e) != nullptr) return 3;
  if (dynamic_cast<const EmptyEvaluationError*>(&e) != nullptr) return 4;
  return 2;
}

}  // namespace gspr
