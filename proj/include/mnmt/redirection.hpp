#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace mnmt::oov {

enum class BorrowSide { Source, Target };

// One borrowed in-vocabulary word standing in for an OOV surface form.
struct Redirection {
  std::string borrowed;  // in-vocabulary word whose vector is used
  std::string oov;       // surface form it stands for
  BorrowSide side = BorrowSide::Source;
  std::size_t position = 0;  // source position of the OOV occurrence
};

struct RedirectionRecord {
  std::vector<Redirection> entries;

  bool empty() const noexcept { return entries.empty(); }
  // Target-side entry for a borrowed word, or nullptr.
  const Redirection* target_marked(const std::string& word) const {
    for (const auto& e : entries) {
      if (e.side == BorrowSide::Target && e.borrowed == word) return &e;
    }
    return nullptr;
  }
};

}  // namespace mnmt::oov
