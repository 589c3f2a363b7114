#include "ttrk/rng.hpp"

#include <sstream>
#include <stdexcept>

namespace ttrk {

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::set_state(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
  if (is.fail()) {
    throw std::invalid_argument("Rng::set_state: malformed engine state");
  }
}

}  // namespace ttrk
