#include "transicd/error.hpp"

namespace transicd {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::rank: return "rank";
    case ErrorKind::degenerate_mask: return "degenerate_mask";
    case ErrorKind::tape_consumed: return "tape_consumed";
    case ErrorKind::index: return "index";
    case ErrorKind::validation: return "validation";
    case ErrorKind::empty_corpus: return "empty_corpus";
    case ErrorKind::insufficient_vocabulary: return "insufficient_vocabulary";
    case ErrorKind::config: return "config";
    case ErrorKind::undefined_auc: return "undefined_auc";
    case ErrorKind::no_computable_label: return "no_computable_label";
    case ErrorKind::range: return "range";
    case ErrorKind::spec: return "spec";
    case ErrorKind::io: return "io";
    case ErrorKind::format: return "format";
    case ErrorKind::artifact_incompatible: return "artifact_incompatible";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::label_not_found: return "label_not_found";
  }
  return "unknown";
}

}  // namespace transicd
