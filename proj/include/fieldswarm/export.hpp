#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fieldswarm/value.hpp"

namespace fieldswarm {

enum class SlotKind : std::uint8_t { Rep = 1, Fold = 2, Nbr = 3, Branch = 4 };

struct Slot {
  SlotKind kind;
  std::uint32_t index;
  std::int64_t tag = 0;  // branch condition / alignment key

  bool operator==(const Slot&) const = default;
};

/// Dynamic call position of a construct invocation within one round.
/// Slots are packed into bytes so that lookups compare with memcmp.
class Path {
 public:
  Path() = default;

  void push(const Slot& s) {
    bytes_.push_back(static_cast<char>(s.kind));
    append_raw(s.index);
    if (s.kind == SlotKind::Branch) append_raw(s.tag);
  }

  /// Truncates back to a length previously returned by size_bytes().
  void truncate(std::size_t n) { bytes_.resize(n); }
  std::size_t size_bytes() const { return bytes_.size(); }
  bool empty() const { return bytes_.empty(); }

  const std::string& key() const { return bytes_; }

  std::vector<Slot> slots() const {
    std::vector<Slot> out;
    std::size_t i = 0;
    while (i < bytes_.size()) {
      Slot s{static_cast<SlotKind>(bytes_[i]), 0, 0};
      ++i;
      std::memcpy(&s.index, bytes_.data() + i, sizeof s.index);
      i += sizeof s.index;
      if (s.kind == SlotKind::Branch) {
        std::memcpy(&s.tag, bytes_.data() + i, sizeof s.tag);
        i += sizeof s.tag;
      }
      out.push_back(s);
    }
    return out;
  }

  static Path from_key(std::string key) {
    Path p;
    p.bytes_ = std::move(key);
    return p;
  }

  static Path from_slots(const std::vector<Slot>& slots) {
    Path p;
    for (const auto& s : slots) p.push(s);
    return p;
  }

  std::string to_text() const {
    std::string out;
    for (const auto& s : slots()) {
      if (!out.empty()) out += ';';
      switch (s.kind) {
        case SlotKind::Rep: out += "rep:"; break;
        case SlotKind::Fold: out += "fold:"; break;
        case SlotKind::Nbr: out += "nbr:"; break;
        case SlotKind::Branch: out += "branch:"; break;
      }
      out += std::to_string(s.index);
      if (s.kind == SlotKind::Branch) {
        out += ':';
        out += std::to_string(s.tag);
      }
    }
    return out;
  }

  bool operator==(const Path&) const = default;
  bool operator<(const Path& o) const { return bytes_ < o.bytes_; }

 private:
  template <typename T>
  void append_raw(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    bytes_.append(buf, sizeof(T));
  }

  std::string bytes_;
};

/// Path-indexed values produced by one round; the neighbour message payload.
class ExportTree {
 public:
  void put(const Path& p, Value v) { entries_[p.key()] = std::move(v); }

  const Value* get(const Path& p) const {
    auto it = entries_.find(p.key());
    return it == entries_.end() ? nullptr : &it->second;
  }
  bool contains(const Path& p) const { return entries_.count(p.key()) != 0; }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// Entries sorted by path bytes.
  std::vector<std::pair<Path, Value>> sorted_entries() const {
    std::vector<std::pair<std::string, const Value*>> raw;
    raw.reserve(entries_.size());
    for (const auto& [k, v] : entries_) raw.emplace_back(k, &v);
    std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::pair<Path, Value>> out;
    out.reserve(raw.size());
    for (auto& [k, v] : raw) out.emplace_back(Path::from_key(k), *v);
    return out;
  }

  /// Debug encoding: one `path "<slots>" = <value>` line per entry.
  std::string to_text() const {
    std::string out;
    for (const auto& [p, v] : sorted_entries()) {
      out += "path \"";
      out += p.to_text();
      out += "\" = ";
      append_text(out, v);
      out += '\n';
    }
    return out;
  }

  bool operator==(const ExportTree& o) const { return entries_ == o.entries_; }

 private:
  std::unordered_map<std::string, Value> entries_;
};

}  // namespace fieldswarm
