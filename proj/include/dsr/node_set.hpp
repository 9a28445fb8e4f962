#pragma once

#include <bit>
#include <cstdint>
#include <iterator>
#include <string>

namespace dsr {

using NodeId = int;

inline constexpr int kMaxNodes = 64;

// Set of node indices packed into one machine word. Used for delegated sets.
class NodeSet {
 public:
  constexpr NodeSet() = default;
  constexpr explicit NodeSet(std::uint64_t bits) : bits_(bits) {}

  static constexpr NodeSet single(NodeId n) { return NodeSet(std::uint64_t{1} << n); }

  static constexpr NodeSet full(int n_nodes) {
    return NodeSet(n_nodes >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n_nodes) - 1);
  }

  constexpr std::uint64_t bits() const { return bits_; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr int size() const { return std::popcount(bits_); }
  constexpr bool contains(NodeId n) const { return (bits_ >> n) & 1u; }

  constexpr bool subset_of(NodeSet other) const { return (bits_ & ~other.bits_) == 0; }
  constexpr bool disjoint(NodeSet other) const { return (bits_ & other.bits_) == 0; }

  constexpr NodeSet with(NodeId n) const { return NodeSet(bits_ | (std::uint64_t{1} << n)); }
  constexpr NodeSet without(NodeId n) const { return NodeSet(bits_ & ~(std::uint64_t{1} << n)); }

  // Lowest member; undefined on the empty set.
  constexpr NodeId first() const { return std::countr_zero(bits_); }

  constexpr NodeSet operator|(NodeSet o) const { return NodeSet(bits_ | o.bits_); }
  constexpr NodeSet operator&(NodeSet o) const { return NodeSet(bits_ & o.bits_); }
  constexpr NodeSet operator-(NodeSet o) const { return NodeSet(bits_ & ~o.bits_); }
  constexpr NodeSet& operator|=(NodeSet o) { bits_ |= o.bits_; return *this; }
  constexpr NodeSet& operator&=(NodeSet o) { bits_ &= o.bits_; return *this; }
  constexpr NodeSet& operator-=(NodeSet o) { bits_ &= ~o.bits_; return *this; }

  constexpr bool operator==(const NodeSet&) const = default;

  // Iterates members in ascending order.
  class iterator {
   public:
    using iterator_category = std::forward_iterator_tag;
    using value_type = NodeId;
    using difference_type = std::ptrdiff_t;
    using pointer = void;
    using reference = NodeId;

    constexpr iterator() = default;
    constexpr explicit iterator(std::uint64_t rest) : rest_(rest) {}
    constexpr NodeId operator*() const { return std::countr_zero(rest_); }
    constexpr iterator& operator++() { rest_ &= rest_ - 1; return *this; }
    constexpr iterator operator++(int) { iterator old = *this; ++*this; return old; }
    constexpr bool operator==(const iterator& o) const { return rest_ == o.rest_; }
   private:
    std::uint64_t rest_ = 0;
  };
  constexpr iterator begin() const { return iterator(bits_); }
  constexpr iterator end() const { return iterator(0); }

  std::string to_string() const {
    std::string out = "{";
    bool first_item = true;
    for (NodeId n : *this) {
      if (!first_item) out += ',';
      out += std::to_string(n);
      first_item = false;
    }
    return out + "}";
  }

 private:
  std::uint64_t bits_ = 0;
};

struct NodeSetHash {
  std::size_t operator()(NodeSet s) const noexcept {
    std::uint64_t x = s.bits() + 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return static_cast<std::size_t>(x ^ (x >> 31));
  }
};

}  // namespace dsr
