#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace idm {

using UserIndex = std::uint32_t;
using ItemIndex = std::uint32_t;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input data: unreadable files, malformed records, invalid datasets.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine failed (e.g. a factorization diverged).
class ComputationError : public Error {
 public:
  using Error::Error;
};

/// Invalid arguments or configuration.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double value) {
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc{}) throw Error("format_double: conversion failed");
  return std::string(buffer, end);
}

inline bool parse_double(std::string_view text, double& out) {
  if (text.empty()) return false;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && end == text.data() + text.size();
}

}  // namespace idm
