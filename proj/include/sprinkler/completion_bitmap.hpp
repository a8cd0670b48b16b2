#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace sprinkler {

// One bit per issued memory request of a queue entry. Each 64-bit word covers
// 64 pages (128 KB at 2 KB pages); longer I/Os chain further words.
class CompletionBitmap {
 public:
  CompletionBitmap() = default;
  explicit CompletionBitmap(std::uint32_t pages) : words_((pages + 63) / 64, 0), pages_(pages) {}

  std::uint32_t size() const { return pages_; }
  std::size_t words() const { return words_.size(); }

  void set(std::uint32_t i) {
    check(i);
    words_[i / 64] |= bit(i);
  }

  // Clearing a bit that is not set means a request completed twice.
  void clear(std::uint32_t i) {
    check(i);
    if (!(words_[i / 64] & bit(i))) throw std::logic_error("completion bitmap: bit cleared twice");
    words_[i / 64] &= ~bit(i);
  }

  bool test(std::uint32_t i) const {
    check(i);
    return (words_[i / 64] & bit(i)) != 0;
  }

  bool none() const {
    for (auto w : words_) {
      if (w) return false;
    }
    return true;
  }

  std::uint64_t word(std::size_t w) const { return words_.at(w); }

 private:
  static std::uint64_t bit(std::uint32_t i) { return std::uint64_t{1} << (i % 64); }
  void check(std::uint32_t i) const {
    if (i >= pages_) throw std::out_of_range("completion bitmap index");
  }

  std::vector<std::uint64_t> words_;
  std::uint32_t pages_ = 0;
};

}  // namespace sprinkler
