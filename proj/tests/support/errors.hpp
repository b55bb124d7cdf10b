#pragma once

#include <doctest.h>

#include <functional>

#include "transicd/error.hpp"

namespace transicd::testing {

inline ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected transicd::Error");
  return ErrorKind::io;
}

}  // namespace transicd::testing
