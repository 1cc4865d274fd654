#pragma once

/// Number formatting helpers. Doubles render via std::to_chars (shortest
/// round-trip form) so emitted files are reproducible byte-for-byte.

#include <charconv>
#include <string>

#include "softpref/error.hpp"

namespace softpref::textio {

inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw NumericError("format_double: conversion failed");
  return std::string(buf, ptr);
}

}  // namespace softpref::textio
