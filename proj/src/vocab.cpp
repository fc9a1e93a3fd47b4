// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#include "loom/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <stdexcept>

namespace loom {

namespace {
const char* kReserved[4] = {"<unk>", "<bos>", "<eos>", "<sep>"};

const std::set<std::string>& function_words() {
  static const std::set<std::string> words = {
      "the", "a",    "an",  "to",   "in",  "at",   "of",  "and",  "or",   "but", "was",
      "were", "is",  "are", "be",   "been", "with", "for", "on",   "up",   "down", "out",
      "his",  "her", "its", "their", "then", "there", "that", "this", "it", "he",  "she",
      "they", "not", "no",  "so",   "as",   "by",   "from", "into", "over", "back"};
  return words;
}

const std::set<std::string>& verb_stems() {
  // stems of the verbs the synthetic grammar uses plus common English verbs
  static const std::set<std::string> stems = {
      "go",      "went",   "walk",  "return", "hurri",  "hurry", "took",  "take",  "pick",
      "grab",    "drop",   "put",   "saw",    "see",    "met",   "meet",  "greet", "gave",
      "give",    "hand",   "examin", "studi",  "study",  "found", "find",  "carri", "carry",
      "ran",     "run",    "move",  "look",   "visit",  "travel", "wander", "stroll", "say",
      "said",    "come",   "came",  "get",    "got",    "make",  "made",  "know",  "knew",
      "think",   "thought", "want",  "call",   "tell",   "told",  "ask",   "left",  "leave",
      "keep",    "kept",   "turn",  "start",  "show",   "hear",  "heard", "play",  "feel",
      "felt",    "bring",  "brought", "wrote", "write",  "read",  "open",  "close", "stood",
      "stand",   "sat",    "sit",   "held",   "hold",   "watch", "follow", "stop",  "wait"};
  return stems;
}

bool is_consonant(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) && c != 'a' && c != 'e' && c != 'i' &&
         c != 'o' && c != 'u';
}
}  // namespace

std::string stem(const std::string& token) {
  std::string t;
  t.reserve(token.size());
  for (char c : token) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));

  auto ends_with = [&](const char* suf) {
    std::size_t n = std::char_traits<char>::length(suf);
    return t.size() >= n && t.compare(t.size() - n, n, suf) == 0;
  };
  auto undouble = [&] {
    if (t.size() >= 2 && t[t.size() - 1] == t[t.size() - 2] && is_consonant(t.back())) {
      t.pop_back();
    }
  };

  if (ends_with("ing") && t.size() >= 5) {
    t.erase(t.size() - 3);
    undouble();
  } else if (ends_with("ed") && t.size() >= 4) {
    t.erase(t.size() - 2);
    undouble();
  } else if ((ends_with("shes") || ends_with("ches") || ends_with("xes") || ends_with("sses") ||
              ends_with("zes")) &&
             t.size() >= 4) {
    t.erase(t.size() - 2);
  } else if (ends_with("s") && !ends_with("ss") && t.size() >= 3) {
    t.erase(t.size() - 1);
  }
  return t;
}

PosTag lexicon_tag(const std::string& token) {
  std::string lower;
  lower.reserve(token.size());
  bool alpha = true;
  for (char c : token) {
    if (!std::isalpha(static_cast<unsigned char>(c))) alpha = false;
    lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (!alpha) return PosTag::other;  // punctuation, numbers
  if (function_words().count(lower)) return PosTag::other;
  if (verb_stems().count(stem(lower))) return PosTag::verb;
  return PosTag::noun;
}

Vocabulary::Vocabulary() {
  for (const char* t : kReserved) {
    index_[t] = static_cast<int>(tokens_.size());
    tokens_.push_back(t);
  }
}

int Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_[token] = id;
  return id;
}

int Vocabulary::lookup(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const { return index_.count(token) > 0; }

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("vocabulary id out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

PosTag Vocabulary::tag(int id) const {
  if (id < 4) return PosTag::other;
  return lexicon_tag(token(id));
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocabulary file: " + path);
  for (const auto& t : tokens_) out << t << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read vocabulary file: " + path);
  Vocabulary v;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    if (row < 4) {
      if (line != kReserved[row]) {
        throw std::runtime_error("vocabulary file missing reserved token at line " +
                                 std::to_string(row));
      }
    } else {
      if (v.contains(line)) throw std::runtime_error("duplicate vocabulary token: " + line);
      v.add(line);
    }
    ++row;
  }
  if (row < 4) throw std::runtime_error("vocabulary file truncated: " + path);
  return v;
}

}  // namespace loom
