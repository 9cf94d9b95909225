#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace relanet::corpus {

// One utterance: pre-tokenized words, a BIO slot tag per word, and the
// sentence's intent set (stored sorted so set comparison is positional).
struct Sample {
  std::vector<std::string> tokens;
  std::vector<std::string> slots;
  std::vector<std::string> intents;

  bool operator==(const Sample&) const = default;
};

struct Dataset {
  std::vector<Sample> samples;
  std::string split;  // train/dev/test tag, informational

  bool operator==(const Dataset& o) const { return samples == o.samples; }
};

// Label universe frozen on the training split. Slot index 0 is always "O".
// Pseudo labels are shared dotted-name prefixes of at least two distinct
// B- labels; parent_of maps each such B- label to its pseudo parent.
struct LabelInventory {
  std::vector<std::string> intent_labels;
  std::vector<std::string> slot_labels;
  std::vector<std::string> pseudo_labels;
  std::unordered_map<std::string, int> intent_index;
  std::unordered_map<std::string, int> slot_index;
  std::unordered_map<std::string, int> pseudo_index;
  std::unordered_map<std::string, std::string> parent_of;

  int n_intents() const { return static_cast<int>(intent_labels.size()); }
  int n_slots() const { return static_cast<int>(slot_labels.size()); }
  int n_pseudo() const { return static_cast<int>(pseudo_labels.size()); }

  // -1 when absent.
  int intent_id(const std::string& label) const;
  int slot_id(const std::string& label) const;

  int o_index() const { return slot_id("O"); }

  // Stable content hash; checkpoints and graph documents carry it so that
  // mismatched artifacts are rejected instead of silently reinterpreted.
  std::string fingerprint() const;

  nlohmann::json to_json() const;
  static LabelInventory from_json(const nlohmann::json& doc);

  bool operator==(const LabelInventory& o) const {
    return intent_labels == o.intent_labels && slot_labels == o.slot_labels &&
           pseudo_labels == o.pseudo_labels && parent_of == o.parent_of;
  }
};

// Word vocabulary; index 0 is reserved for unknown words.
struct Vocabulary {
  static constexpr int kUnk = 0;
  std::vector<std::string> words;  // words[0] == "<unk>"
  std::unordered_map<std::string, int> index;

  int id(const std::string& w) const {
    auto it = index.find(w);
    return it == index.end() ? kUnk : it->second;
  }
  int size() const { return static_cast<int>(words.size()); }
};

// Parses the block format: per sample, one "token SP tag" line per word
// followed by a single intent line with labels joined by '#'; blank lines
// separate samples. In strict mode BIO order violations are errors;
// otherwise they are kept and reported through `warnings`.
Dataset parse_corpus(const std::string& text, bool strict = false,
                     std::vector<std::string>* warnings = nullptr);

Dataset load_corpus(const std::string& path, bool strict = false,
                    std::vector<std::string>* warnings = nullptr);

// Inverse of parse_corpus; parse(serialize(d)) == d.
std::string serialize_corpus(const Dataset& ds);

LabelInventory build_inventory(const Dataset& train);

Vocabulary build_vocabulary(const Dataset& train);

}  // namespace relanet::corpus
