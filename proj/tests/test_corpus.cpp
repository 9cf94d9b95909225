#include <algorithm>
#include <string>
#include <vector>

#include "doctest.h"

#include "relanet/corpus.hpp"
#include "relanet/errors.hpp"

using namespace relanet;
using corpus::parse_corpus;

namespace {

const char* kSmallCorpus =
    "show O\n"
    "me O\n"
    "flights B-flight_mod\n"
    "from O\n"
    "denver B-fromloc.city_name\n"
    "atis_flight\n"
    "\n"
    "list O\n"
    "fares B-fare_basis_code\n"
    "and O\n"
    "flights O\n"
    "atis_airfare#atis_flight\n";

}  // namespace

TEST_CASE("parses blank-line separated blocks") {
  auto ds = parse_corpus(kSmallCorpus, false);
  REQUIRE(ds.samples.size() == 2);
  CHECK(ds.samples[0].tokens == std::vector<std::string>{"show", "me", "flights", "from", "denver"});
  CHECK(ds.samples[0].slots[4] == "B-fromloc.city_name");
  CHECK(ds.samples[0].intents == std::vector<std::string>{"atis_flight"});
  CHECK(ds.samples[1].intents == std::vector<std::string>{"atis_airfare", "atis_flight"});
}

TEST_CASE("accepts a block with a leading utterance echo line") {
  auto ds = parse_corpus("show me flights\nshow O\nme O\nflights O\natis_flight\n", false);
  REQUIRE(ds.samples.size() == 1);
  CHECK(ds.samples[0].tokens.size() == 3);
  CHECK(ds.samples[0].slots == std::vector<std::string>{"O", "O", "O"});
  CHECK(ds.samples[0].intents == std::vector<std::string>{"atis_flight"});
}

TEST_CASE("intent line with separator yields a duplicate-free sorted set") {
  auto ds = parse_corpus("a O\natis_flight#atis_airfare#atis_flight\n", false);
  CHECK(ds.samples[0].intents == std::vector<std::string>{"atis_airfare", "atis_flight"});
}

TEST_CASE("rejects malformed input") {
  CHECK_THROWS_AS(parse_corpus("", false), DataError);
  CHECK_THROWS_AS(parse_corpus("\n\n", false), DataError);
  // token line with three fields and no room for an echo line
  CHECK_THROWS_AS(parse_corpus("a b c\natis_flight\n", false), DataError);
  // tag outside the BIO alphabet
  CHECK_THROWS_AS(parse_corpus("a X-1\natis_flight\n", false), DataError);
  // last line looks like a token line: intent line missing
  CHECK_THROWS_AS(parse_corpus("a O\nb O\n", false), DataError);
  // empty intent label
  CHECK_THROWS_AS(parse_corpus("a O\natis_flight#\n", false), DataError);
  CHECK_THROWS_AS(parse_corpus("one_line_only\n", false), DataError);
}

TEST_CASE("BIO continuation: lenient warns, strict throws") {
  const char* text = "a O\nb I-city_name\natis_flight\n";
  std::vector<std::string> warnings;
  auto ds = parse_corpus(text, false, &warnings);
  CHECK(ds.samples.size() == 1);
  CHECK(warnings.size() == 1);
  CHECK_THROWS_AS(parse_corpus(text, true), DataError);

  // I- after matching B- and after matching I- are both fine
  warnings.clear();
  parse_corpus("a B-x\nb I-x\nc I-x\natis_flight\n", true, &warnings);
  CHECK(warnings.empty());
  // I- after a different label is a violation
  CHECK_THROWS_AS(parse_corpus("a B-y\nb I-x\natis_flight\n", true), DataError);
}

TEST_CASE("serialize then parse is identity") {
  auto ds = parse_corpus(kSmallCorpus, false);
  auto text = corpus::serialize_corpus(ds);
  auto again = parse_corpus(text, false);
  REQUIRE(again.samples.size() == ds.samples.size());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) CHECK(again.samples[i] == ds.samples[i]);
}

TEST_CASE("windows line endings are tolerated") {
  auto ds = parse_corpus("a O\r\nb B-x\r\natis_flight\r\n", false);
  CHECK(ds.samples[0].tokens == std::vector<std::string>{"a", "b"});
}

TEST_CASE("inventory: ordering, O slot, ids") {
  auto ds = parse_corpus(kSmallCorpus, false);
  auto inv = corpus::build_inventory(ds);
  CHECK(inv.intent_labels == std::vector<std::string>{"atis_flight", "atis_airfare"});
  CHECK(inv.slot_labels[0] == "O");
  CHECK(inv.slot_id("O") == 0);
  CHECK(inv.n_slots() == 4);
  CHECK(inv.intent_id("atis_flight") == 0);
  CHECK(inv.intent_id("missing") == -1);
  CHECK(inv.o_index() == 0);

  auto inv2 = corpus::build_inventory(ds);
  CHECK(inv.intent_labels == inv2.intent_labels);
  CHECK(inv.slot_labels == inv2.slot_labels);
  CHECK(inv.fingerprint() == inv2.fingerprint());
}

TEST_CASE("pseudo labels from shared dotted prefixes") {
  auto ds = parse_corpus(
      "a B-arrive_time.time\n"
      "b B-arrive_time.period_of_day\n"
      "c B-city\n"
      "atis_flight\n",
      false);
  auto inv = corpus::build_inventory(ds);
  CHECK(inv.pseudo_labels == std::vector<std::string>{"arrive_time"});
  CHECK(inv.parent_of.at("B-arrive_time.time") == "arrive_time");
  CHECK(inv.parent_of.at("B-arrive_time.period_of_day") == "arrive_time");
  CHECK(inv.parent_of.count("B-city") == 0);

  // everything distinct: no pseudo labels at all
  auto ds2 = parse_corpus("a B-x.1\nb B-y.1\nc B-z\natis_flight\n", false);
  auto inv2 = corpus::build_inventory(ds2);
  CHECK(inv2.pseudo_labels.empty());
  CHECK(inv2.parent_of.empty());
}

TEST_CASE("a prefix needs two distinct children, repeats do not count") {
  auto ds = parse_corpus("a B-x.1\nb I-x.1\nc B-x.1\natis_flight\n", false);
  auto inv = corpus::build_inventory(ds);
  CHECK(inv.pseudo_labels.empty());

  auto ds2 = parse_corpus("a B-x.1\nb B-x.2\natis_flight\n", false);
  auto inv2 = corpus::build_inventory(ds2);
  CHECK(inv2.pseudo_labels == std::vector<std::string>{"x"});
}

TEST_CASE("pseudo soundness: every pseudo label has at least two children") {
  auto ds = parse_corpus(kSmallCorpus, false);
  auto inv = corpus::build_inventory(ds);
  for (const auto& p : inv.pseudo_labels) {
    int children = 0;
    for (const auto& [child, parent] : inv.parent_of)
      if (parent == p) ++children;
    CHECK(children >= 2);
  }
}

TEST_CASE("inventory json round trip preserves ids and fingerprint") {
  auto ds = parse_corpus(kSmallCorpus, false);
  auto inv = corpus::build_inventory(ds);
  auto doc = inv.to_json();
  auto back = corpus::LabelInventory::from_json(doc);
  CHECK(back == inv);
  CHECK(back.fingerprint() == inv.fingerprint());
}

TEST_CASE("fingerprint changes when the label set changes") {
  auto a = corpus::build_inventory(parse_corpus("a B-x\ni1\n", false));
  auto b = corpus::build_inventory(parse_corpus("a B-y\ni1\n", false));
  CHECK(a.fingerprint() != b.fingerprint());
}

TEST_CASE("vocabulary: unk first, first occurrence order, fallback") {
  auto ds = parse_corpus(kSmallCorpus, false);
  auto vocab = corpus::build_vocabulary(ds);
  CHECK(vocab.words[0] == "<unk>");
  CHECK(vocab.id("show") == 1);
  CHECK(vocab.id("never-seen") == 0);
  // "flights" appears in both samples but is stored once
  CHECK(std::count(vocab.words.begin(), vocab.words.end(), "flights") == 1);
}
