#include <algorithm>

#include "cgt/error.hpp"
#include "cgt/tensor.hpp"

namespace cgt {

std::string Shape::str() const {
  return "(" + std::to_string(height) + "x" + std::to_string(width) + "x" +
         std::to_string(channels) + ")";
}

void clamp01(Tensor& t) noexcept {
  for (float& v : t.storage()) v = std::clamp(v, 0.0f, 1.0f);
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::argument:
      return 2;
    case ErrorKind::format:
    case ErrorKind::corrupt:
    case ErrorKind::integrity:
    case ErrorKind::io:
    case ErrorKind::orchestration:
      return 3;
    case ErrorKind::numeric:
    case ErrorKind::training:
      return 4;
  }
  return 1;
}

}  // namespace cgt
