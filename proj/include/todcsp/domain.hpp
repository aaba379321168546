#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace todcsp {

struct SlotType {
  std::string name;
  std::vector<std::string> values;  // canonical, sorted, unique
};

// Slot schema of the single concept a run works on (restaurants in practice).
class Ontology {
 public:
  Ontology() = default;
  // Canonicalises and sorts values; throws ValidationError on duplicate slot
  // names, empty slots or duplicate values.
  explicit Ontology(std::vector<SlotType> slots);

  const std::vector<SlotType>& slots() const { return slots_; }
  const SlotType* find(std::string_view slot) const;
  bool has_value(std::string_view slot, std::string_view value) const;
  // Sorted union of every slot's values (domain used when C1 is ablated).
  std::vector<std::string> all_values() const;

 private:
  std::vector<SlotType> slots_;
};

struct Instance {
  std::string id;
  std::map<std::string, std::string> attributes;  // slot -> canonical value

  const std::string* value_of(std::string_view slot) const;
};

struct KnowledgeBase {
  std::vector<Instance> instances;

  std::size_t size() const { return instances.size(); }
  bool empty() const { return instances.empty(); }
  const Instance* find(std::string_view id) const;
};

// Canonicalises attribute values in place and checks them against the
// ontology. Throws ValidationError naming the offending instance.
void validate_kb(KnowledgeBase& kb, const Ontology& ontology);

// Fixed-size set of instance positions.
class InstanceSet {
 public:
  InstanceSet() = default;
  explicit InstanceSet(std::size_t size, bool full = false);

  std::size_t size() const { return size_; }
  void insert(std::size_t i) { words_[i / 64] |= (std::uint64_t{1} << (i % 64)); }
  bool contains(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1U; }
  std::size_t count() const;
  bool any() const;

  InstanceSet& operator&=(const InstanceSet& other);
  InstanceSet& operator|=(const InstanceSet& other);

 private:
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

// (slot, value) pairs. Values for the same slot are alternatives; distinct
// slots must all match.
using Filters = std::vector<std::pair<std::string, std::string>>;

class KBIndex {
 public:
  KBIndex() = default;
  static KBIndex build(const KnowledgeBase& kb);

  std::size_t total() const { return ids_.size(); }
  const std::vector<std::string>& instance_ids() const { return ids_; }

  // Instances holding `value` for `slot`; an empty set for unseen pairs.
  const InstanceSet& postings(std::string_view slot, std::string_view value) const;
  std::vector<std::string> posting_ids(std::string_view slot, std::string_view value) const;
  // Distinct values the kb holds for a slot, sorted.
  std::vector<std::string> values_of(std::string_view slot) const;
  bool kb_has_value(std::string_view slot, std::string_view value) const;

  InstanceSet matching(const Filters& filters) const;
  std::size_t count_matching(const Filters& filters) const { return matching(filters).count(); }
  bool exists_matching(const Filters& filters) const { return matching(filters).any(); }

 private:
  std::vector<std::string> ids_;
  std::map<std::pair<std::string, std::string>, InstanceSet, std::less<>> postings_;
  InstanceSet empty_;
};

inline constexpr std::size_t kMaxSampledKbSize = 9;
inline constexpr std::size_t kMaxExtraInstances = 8;

// Pertinent instances plus n in {0..8} uniformly drawn others (without
// replacement), never more than 9 in total. Output follows global kb order.
KnowledgeBase sample_kb(const KnowledgeBase& global_kb,
                        const std::vector<std::string>& pertinent_ids,
                        std::uint64_t seed);

// Same as sample_kb but with the padding size fixed (used by tests).
KnowledgeBase sample_kb_with_padding(const KnowledgeBase& global_kb,
                                     const std::vector<std::string>& pertinent_ids,
                                     std::size_t padding, std::uint64_t seed);

}  // namespace todcsp
