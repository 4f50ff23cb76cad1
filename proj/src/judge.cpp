#include "pairscale/judge.hpp"

namespace pairscale {

std::string CategoryQuery::key() const {
  return entity.id + "/" + std::to_string(run) + "/" + std::to_string(attempt);
}

}  // namespace pairscale
