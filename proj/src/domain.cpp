#include "todcsp/domain.hpp"

#include <algorithm>
#include <bit>
#include <set>

#include "todcsp/dialogue.hpp"
#include "todcsp/errors.hpp"
#include "todcsp/random.hpp"

namespace todcsp {

Ontology::Ontology(std::vector<SlotType> slots) : slots_(std::move(slots)) {
  std::set<std::string, std::less<>> names;
  for (auto& slot : slots_) {
    if (slot.name.empty()) throw ValidationError("ontology: slot with empty name");
    if (slot.name == kCountMarker) throw ValidationError("ontology: reserved slot name " + slot.name);
    if (!names.insert(slot.name).second) throw ValidationError("ontology: duplicate slot '" + slot.name + "'");
    if (slot.values.empty()) throw ValidationError("ontology: slot '" + slot.name + "' has no values");
    for (auto& v : slot.values) v = normalize_text(v);
    std::sort(slot.values.begin(), slot.values.end());
    auto dup = std::adjacent_find(slot.values.begin(), slot.values.end());
    if (dup != slot.values.end())
      throw ValidationError("ontology: duplicate value '" + *dup + "' in slot '" + slot.name + "'");
  }
}

const SlotType* Ontology::find(std::string_view slot) const {
  for (const auto& s : slots_)
    if (s.name == slot) return &s;
  return nullptr;
}

bool Ontology::has_value(std::string_view slot, std::string_view value) const {
  const SlotType* s = find(slot);
  return s && std::binary_search(s->values.begin(), s->values.end(), value);
}

std::vector<std::string> Ontology::all_values() const {
  std::set<std::string> all;
  for (const auto& s : slots_) all.insert(s.values.begin(), s.values.end());
  return {all.begin(), all.end()};
}

const std::string* Instance::value_of(std::string_view slot) const {
  auto it = attributes.find(std::string(slot));
  return it == attributes.end() ? nullptr : &it->second;
}

const Instance* KnowledgeBase::find(std::string_view id) const {
  for (const auto& i : instances)
    if (i.id == id) return &i;
  return nullptr;
}

void validate_kb(KnowledgeBase& kb, const Ontology& ontology) {
  std::set<std::string, std::less<>> ids;
  for (auto& inst : kb.instances) {
    if (inst.id.empty()) throw ValidationError("kb: instance with empty id");
    if (!ids.insert(inst.id).second) throw ValidationError("kb: duplicate instance id '" + inst.id + "'");
    for (auto& [slot, value] : inst.attributes) {
      value = normalize_text(value);
      if (!ontology.find(slot))
        throw ValidationError("kb: instance '" + inst.id + "' uses unknown slot '" + slot + "'");
      if (!ontology.has_value(slot, value))
        throw ValidationError("kb: instance '" + inst.id + "' has value '" + value +
                              "' outside slot '" + slot + "'");
    }
  }
}

InstanceSet::InstanceSet(std::size_t size, bool full) : size_(size), words_((size + 63) / 64, 0) {
  if (full) {
    for (std::size_t i = 0; i < size; ++i) insert(i);
  }
}

std::size_t InstanceSet::count() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

bool InstanceSet::any() const {
  return std::any_of(words_.begin(), words_.end(), [](auto w) { return w != 0; });
}

InstanceSet& InstanceSet::operator&=(const InstanceSet& other) {
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= i < other.words_.size() ? other.words_[i] : 0;
  return *this;
}

InstanceSet& InstanceSet::operator|=(const InstanceSet& other) {
  for (std::size_t i = 0; i < words_.size() && i < other.words_.size(); ++i) words_[i] |= other.words_[i];
  return *this;
}

KBIndex KBIndex::build(const KnowledgeBase& kb) {
  KBIndex index;
  const std::size_t n = kb.instances.size();
  index.empty_ = InstanceSet(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Instance& inst = kb.instances[i];
    index.ids_.push_back(inst.id);
    for (const auto& [slot, value] : inst.attributes) {
      auto [it, fresh] = index.postings_.try_emplace({slot, value}, n);
      it->second.insert(i);
    }
  }
  return index;
}

const InstanceSet& KBIndex::postings(std::string_view slot, std::string_view value) const {
  auto it = postings_.find(std::pair<std::string, std::string>(slot, value));
  return it == postings_.end() ? empty_ : it->second;
}

std::vector<std::string> KBIndex::posting_ids(std::string_view slot, std::string_view value) const {
  std::vector<std::string> out;
  const InstanceSet& set = postings(slot, value);
  for (std::size_t i = 0; i < ids_.size(); ++i)
    if (set.contains(i)) out.push_back(ids_[i]);
  return out;
}

std::vector<std::string> KBIndex::values_of(std::string_view slot) const {
  std::vector<std::string> out;
  for (const auto& [key, set] : postings_)
    if (key.first == slot) out.push_back(key.second);
  return out;
}

bool KBIndex::kb_has_value(std::string_view slot, std::string_view value) const {
  return postings(slot, value).any();
}

InstanceSet KBIndex::matching(const Filters& filters) const {
  InstanceSet result(total(), true);
  std::map<std::string, InstanceSet, std::less<>> by_slot;
  for (const auto& [slot, value] : filters) {
    auto [it, fresh] = by_slot.try_emplace(slot, total());
    it->second |= postings(slot, value);
  }
  for (const auto& [slot, set] : by_slot) result &= set;
  return result;
}

KnowledgeBase sample_kb_with_padding(const KnowledgeBase& global_kb,
                                     const std::vector<std::string>& pertinent_ids,
                                     std::size_t padding, std::uint64_t seed) {
  std::set<std::string, std::less<>> pertinent(pertinent_ids.begin(), pertinent_ids.end());
  if (pertinent.size() > kMaxSampledKbSize)
    throw ValidationError("sample_kb: " + std::to_string(pertinent.size()) +
                          " pertinent instances exceed the maximum of 9");
  for (const auto& id : pertinent)
    if (!global_kb.find(id)) throw ValidationError("sample_kb: unknown pertinent instance '" + id + "'");

  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < global_kb.instances.size(); ++i)
    if (!pertinent.contains(global_kb.instances[i].id)) pool.push_back(i);

  padding = std::min({padding, pool.size(), kMaxSampledKbSize - pertinent.size()});
  Rng rng(seed);
  // Partial Fisher-Yates: the first `padding` slots become the sample.
  for (std::size_t k = 0; k < padding; ++k) {
    std::size_t j = k + static_cast<std::size_t>(rng.below(pool.size() - k));
    std::swap(pool[k], pool[j]);
  }
  std::vector<bool> keep(global_kb.instances.size(), false);
  for (std::size_t k = 0; k < padding; ++k) keep[pool[k]] = true;

  KnowledgeBase out;
  for (std::size_t i = 0; i < global_kb.instances.size(); ++i) {
    const Instance& inst = global_kb.instances[i];
    if (keep[i] || pertinent.contains(inst.id)) out.instances.push_back(inst);
  }
  return out;
}

KnowledgeBase sample_kb(const KnowledgeBase& global_kb, const std::vector<std::string>& pertinent_ids,
                        std::uint64_t seed) {
  // The padding size uses the seed's own stream, the draw a derived one.
  Rng rng(seed);
  const auto padding = static_cast<std::size_t>(rng.between(0, kMaxExtraInstances));
  return sample_kb_with_padding(global_kb, pertinent_ids, padding, splitmix64(seed));
}

}  // namespace todcsp
