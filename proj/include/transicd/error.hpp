#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace transicd {

enum class ErrorKind {
  dimension,
  rank,
  degenerate_mask,
  tape_consumed,
  index,
  validation,
  empty_corpus,
  insufficient_vocabulary,
  config,
  undefined_auc,
  no_computable_label,
  range,
  spec,
  io,
  format,
  artifact_incompatible,
  divergence,
  label_not_found,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace transicd
