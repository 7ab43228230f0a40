#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace oodbench {

enum class Errc {
  parameter,          // invalid severity / model / option value
  shape,              // grid or extent mismatch
  dimension,          // signature dimension mismatch
  format,             // malformed file contents (bad magic, bad header)
  unsupported_datatype,
  io,                 // unreadable/unwritable path, truncated payload
  invalid_probability,
  insufficient_data,  // empty sample / reference set
  data,               // non-finite values where finite ones are required
  empty_mask,
  usage,              // method/input mismatch
  config,             // missing or inconsistent configuration
};

std::string_view to_string(Errc code) noexcept;

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + " error: " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace oodbench
