// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace loom {

enum class PosTag : std::uint8_t { other = 0, noun = 1, verb = 2 };

// Closed vocabulary with dense ids and four reserved entries. Tags come from
// a small built-in lexicon (function words and common verbs); unknown words
// default to noun.
class Vocabulary {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kSep = 3;

  Vocabulary();

  int add(const std::string& token);           // idempotent; returns the id
  int lookup(const std::string& token) const;  // kUnk when absent
  bool contains(const std::string& token) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const;
  PosTag tag(int id) const;

  // one token per line, line number = id (reserved rows included)
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// built-in tag lexicon used for both synthetic and ingested text
PosTag lexicon_tag(const std::string& token);

// fixed suffix-stripping stemmer: ing/ed/es/s with a doubled-consonant guard
std::string stem(const std::string& token);

}  // namespace loom
