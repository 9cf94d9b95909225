#include "relanet/corpus.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "relanet/errors.hpp"
#include "relanet/util.hpp"

namespace relanet::corpus {

namespace {

bool is_bio_tag(const std::string& tag) {
  if (tag == "O") return true;
  if (tag.size() < 3) return false;
  if (tag[1] != '-') return false;
  return tag[0] == 'B' || tag[0] == 'I';
}

// Checks whether `tag` at position i legally continues `prev` (lenient BIO:
// I-x must follow B-x or I-x).
bool bio_violation(const std::string& prev, const std::string& tag) {
  if (tag.empty() || tag[0] != 'I') return false;
  const std::string name = tag.substr(2);
  if (prev.size() >= 3 && (prev[0] == 'B' || prev[0] == 'I') && prev.substr(2) == name) return false;
  return true;
}

Sample parse_block(const std::vector<std::string>& lines, std::size_t block_no, bool strict,
                   std::vector<std::string>* warnings) {
  if (lines.size() < 2) {
    throw DataError("block " + std::to_string(block_no) +
                    ": empty block (needs at least one token line and an intent line)");
  }
  // Some corpora echo the raw utterance on the first line of a block. Skip it
  // when it cannot be a token line and token lines still follow.
  std::size_t first = 0;
  if (lines.size() >= 3 && split(lines[0], ' ').size() != 2) first = 1;
  Sample s;
  for (std::size_t i = first; i + 1 < lines.size(); ++i) {
    auto fields = split(lines[i], ' ');
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw DataError("block " + std::to_string(block_no) + " line " + std::to_string(i + 1) +
                      ": malformed line (expected \"token tag\"): " + lines[i]);
    }
    if (!is_bio_tag(fields[1])) {
      throw DataError("block " + std::to_string(block_no) + " line " + std::to_string(i + 1) +
                      ": slot tag must be O, B-<name> or I-<name>: " + fields[1]);
    }
    s.tokens.push_back(fields[0]);
    s.slots.push_back(fields[1]);
  }

  const std::string& intent_line = lines.back();
  if (intent_line.find(' ') != std::string::npos) {
    throw DataError("block " + std::to_string(block_no) +
                    ": missing intent line (last line looks like a token line)");
  }
  std::set<std::string> seen;
  for (const auto& part : split(intent_line, '#')) {
    if (part.empty()) {
      throw DataError("block " + std::to_string(block_no) + ": empty intent label in: " + intent_line);
    }
    seen.insert(part);
  }
  s.intents.assign(seen.begin(), seen.end());

  for (std::size_t i = 0; i < s.slots.size(); ++i) {
    const std::string prev = i == 0 ? std::string("O") : s.slots[i - 1];
    if (bio_violation(prev, s.slots[i])) {
      std::string msg = "block " + std::to_string(block_no) + " position " + std::to_string(i) +
                        ": I- tag without matching B-: " + s.slots[i];
      if (strict) throw DataError(msg);
      if (warnings) warnings->push_back(msg);
    }
  }
  return s;
}

}  // namespace

Dataset parse_corpus(const std::string& text, bool strict, std::vector<std::string>* warnings) {
  Dataset ds;
  std::vector<std::string> block;
  std::size_t block_no = 0;
  std::istringstream in(text);
  std::string line;
  auto flush = [&] {
    if (block.empty()) return;
    ++block_no;
    ds.samples.push_back(parse_block(block, block_no, strict, warnings));
    block.clear();
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
    } else {
      block.push_back(line);
    }
  }
  flush();
  if (ds.samples.empty()) throw DataError("corpus contains no samples");
  return ds;
}

Dataset load_corpus(const std::string& path, bool strict, std::vector<std::string>* warnings) {
  auto ds = parse_corpus(read_file(path), strict, warnings);
  return ds;
}

std::string serialize_corpus(const Dataset& ds) {
  std::string out;
  for (std::size_t k = 0; k < ds.samples.size(); ++k) {
    const Sample& s = ds.samples[k];
    if (k) out += "\n";
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      out += s.tokens[i];
      out += ' ';
      out += s.slots[i];
      out += '\n';
    }
    out += join(s.intents, "#");
    out += '\n';
  }
  return out;
}

int LabelInventory::intent_id(const std::string& label) const {
  auto it = intent_index.find(label);
  return it == intent_index.end() ? -1 : it->second;
}

int LabelInventory::slot_id(const std::string& label) const {
  auto it = slot_index.find(label);
  return it == slot_index.end() ? -1 : it->second;
}

std::string LabelInventory::fingerprint() const {
  std::string canon = "intents\x1f" + join(intent_labels, "\x1e") + "\x1fslots\x1f" +
                      join(slot_labels, "\x1e") + "\x1fpseudo\x1f" + join(pseudo_labels, "\x1e") +
                      "\x1fparents\x1f";
  std::vector<std::string> pairs;
  pairs.reserve(parent_of.size());
  for (const auto& [child, parent] : parent_of) pairs.push_back(child + "=" + parent);
  std::sort(pairs.begin(), pairs.end());
  canon += join(pairs, "\x1e");
  return hex64(fnv1a64(canon));
}

nlohmann::json LabelInventory::to_json() const {
  nlohmann::json doc;
  doc["intent_labels"] = intent_labels;
  doc["slot_labels"] = slot_labels;
  doc["pseudo_labels"] = pseudo_labels;
  nlohmann::json parents = nlohmann::json::object();
  std::vector<std::string> keys;
  for (const auto& [k, v] : parent_of) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  for (const auto& k : keys) parents[k] = parent_of.at(k);
  doc["parent_of"] = parents;
  doc["fingerprint"] = fingerprint();
  return doc;
}

LabelInventory LabelInventory::from_json(const nlohmann::json& doc) {
  LabelInventory inv;
  try {
    inv.intent_labels = doc.at("intent_labels").get<std::vector<std::string>>();
    inv.slot_labels = doc.at("slot_labels").get<std::vector<std::string>>();
    inv.pseudo_labels = doc.at("pseudo_labels").get<std::vector<std::string>>();
    for (const auto& [k, v] : doc.at("parent_of").items()) inv.parent_of[k] = v.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid inventory document: ") + e.what());
  }
  for (std::size_t i = 0; i < inv.intent_labels.size(); ++i) inv.intent_index[inv.intent_labels[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < inv.slot_labels.size(); ++i) inv.slot_index[inv.slot_labels[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < inv.pseudo_labels.size(); ++i) inv.pseudo_index[inv.pseudo_labels[i]] = static_cast<int>(i);
  return inv;
}

LabelInventory build_inventory(const Dataset& train) {
  if (train.samples.empty()) throw DataError("cannot build inventory from empty dataset");
  LabelInventory inv;
  inv.slot_labels.push_back("O");
  inv.slot_index["O"] = 0;
  for (const Sample& s : train.samples) {
    for (const auto& intent : s.intents) {
      if (!inv.intent_index.count(intent)) {
        inv.intent_index[intent] = inv.n_intents();
        inv.intent_labels.push_back(intent);
      }
    }
    for (const auto& tag : s.slots) {
      if (!inv.slot_index.count(tag)) {
        inv.slot_index[tag] = inv.n_slots();
        inv.slot_labels.push_back(tag);
      }
    }
  }

  // Pseudo labels: the name prefix before the first '.' of a B- label, kept
  // only when at least two distinct B- labels share it.
  std::unordered_map<std::string, int> prefix_children;
  for (const auto& tag : inv.slot_labels) {
    if (tag.rfind("B-", 0) != 0) continue;
    const std::string name = tag.substr(2);
    auto dot = name.find('.');
    if (dot == std::string::npos || dot == 0) continue;
    ++prefix_children[name.substr(0, dot)];
  }
  for (const auto& tag : inv.slot_labels) {
    if (tag.rfind("B-", 0) != 0) continue;
    const std::string name = tag.substr(2);
    auto dot = name.find('.');
    if (dot == std::string::npos || dot == 0) continue;
    const std::string prefix = name.substr(0, dot);
    if (prefix_children[prefix] < 2) continue;
    if (!inv.pseudo_index.count(prefix)) {
      inv.pseudo_index[prefix] = inv.n_pseudo();
      inv.pseudo_labels.push_back(prefix);
    }
    inv.parent_of[tag] = prefix;
  }
  return inv;
}

Vocabulary build_vocabulary(const Dataset& train) {
  Vocabulary v;
  v.words.push_back("<unk>");
  v.index["<unk>"] = 0;
  for (const Sample& s : train.samples) {
    for (const auto& tok : s.tokens) {
      if (!v.index.count(tok)) {
        v.index[tok] = v.size();
        v.words.push_back(tok);
      }
    }
  }
  return v;
}

}  // namespace relanet::corpus
