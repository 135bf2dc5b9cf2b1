#pragma once

#include <cstdint>
#include <vector>

namespace coarse {

/// Fixed-size bit vector over the universe point indices.
class DynBitset {
 public:
  DynBitset() = default;
  explicit DynBitset(size_t n) : n_(n), w_((n + 63) / 64, 0) {}

  size_t size() const { return n_; }
  bool get(size_t i) const { return (w_[i >> 6] >> (i & 63)) & 1; }
  void set(size_t i) { w_[i >> 6] |= uint64_t(1) << (i & 63); }
  void reset(size_t i) { w_[i >> 6] &= ~(uint64_t(1) << (i & 63)); }

  size_t count() const {
    size_t c = 0;
    for (uint64_t w : w_) c += static_cast<size_t>(__builtin_popcountll(w));
    return c;
  }
  bool any() const {
    for (uint64_t w : w_)
      if (w) return true;
    return false;
  }
  bool none() const { return !any(); }

  DynBitset& operator&=(const DynBitset& o) {
    for (size_t i = 0; i < w_.size(); ++i) w_[i] &= o.w_[i];
    return *this;
  }
  DynBitset& operator|=(const DynBitset& o) {
    for (size_t i = 0; i < w_.size(); ++i) w_[i] |= o.w_[i];
    return *this;
  }
  DynBitset& subtract(const DynBitset& o) {
    for (size_t i = 0; i < w_.size(); ++i) w_[i] &= ~o.w_[i];
    return *this;
  }
  DynBitset& flip_all() {
    for (auto& w : w_) w = ~w;
    trim();
    return *this;
  }

  friend DynBitset operator&(DynBitset a, const DynBitset& b) { return a &= b; }
  friend DynBitset operator|(DynBitset a, const DynBitset& b) { return a |= b; }
  friend DynBitset operator-(DynBitset a, const DynBitset& b) {
    return a.subtract(b);
  }
  DynBitset operator~() const {
    DynBitset r = *this;
    r.flip_all();
    return r;
  }

  bool operator==(const DynBitset& o) const { return w_ == o.w_; }

  bool is_subset_of(const DynBitset& o) const {
    for (size_t i = 0; i < w_.size(); ++i)
      if (w_[i] & ~o.w_[i]) return false;
    return true;
  }
  bool intersects(const DynBitset& o) const {
    for (size_t i = 0; i < w_.size(); ++i)
      if (w_[i] & o.w_[i]) return true;
    return false;
  }

  /// Visit set bits in increasing index order.
  template <typename F>
  void for_each(F&& f) const {
    for (size_t wi = 0; wi < w_.size(); ++wi) {
      uint64_t w = w_[wi];
      while (w) {
        unsigned b = static_cast<unsigned>(__builtin_ctzll(w));
        f(wi * 64 + b);
        w &= w - 1;
      }
    }
  }

  int64_t first() const {
    for (size_t wi = 0; wi < w_.size(); ++wi)
      if (w_[wi])
        return static_cast<int64_t>(wi * 64 +
                                    __builtin_ctzll(w_[wi]));
    return -1;
  }

 private:
  void trim() {
    if (n_ % 64) w_.back() &= (uint64_t(1) << (n_ % 64)) - 1;
  }
  size_t n_ = 0;
  std::vector<uint64_t> w_;
};

}  // namespace coarse
