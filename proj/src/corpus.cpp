// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#include "loom/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace loom {

std::int64_t Corpus::total_sentences() const {
  std::int64_t n = 0;
  for (const auto& s : stories) n += s.length();
  return n;
}

void Corpus::validate() const {
  for (const auto& s : stories) {
    if (s.sentences.empty()) throw std::runtime_error("story with zero sentences: " + s.id);
    for (const auto& sent : s.sentences) {
      for (int t : sent) {
        if (t < 0 || t >= vocab.size()) {
          throw std::runtime_error("token id out of vocabulary in story " + s.id);
        }
      }
    }
  }
}

void StoryWorldConfig::validate() const {
  if (n_entities < 2) throw std::invalid_argument("story world needs >= 2 entities");
  if (n_locations < 2) throw std::invalid_argument("story world needs >= 2 locations");
  if (n_event_templates < 1) throw std::invalid_argument("need >= 1 event template");
  if (min_sentences < 3) throw std::invalid_argument("min story length must be >= 3");
  if (max_sentences < min_sentences) throw std::invalid_argument("bad story length range");
  if (coherence < 0.0 || coherence > 1.0) throw std::invalid_argument("coherence not in [0,1]");
  if (protagonist_persistence < 0.0 || protagonist_persistence > 1.0) {
    throw std::invalid_argument("protagonist_persistence not in [0,1]");
  }
}

// ---------------------------------------------------------------------------
// story world
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string>& entity_pool() {
  static const std::vector<std::string> v = {"alice", "bob",   "carol", "dave", "erin",
                                             "frank", "grace", "henry", "iris", "jack",
                                             "kate",  "liam",  "mona",  "nora", "oscar",
                                             "pete",  "quinn", "ruth",  "sam",  "tess"};
  return v;
}

const std::vector<std::string>& location_pool() {
  static const std::vector<std::string> v = {"kitchen", "garden", "library", "market",
                                             "cellar",  "attic",  "harbor",  "meadow",
                                             "tower",   "stable", "bakery",  "forge",
                                             "orchard", "chapel", "bridge",  "mill"};
  return v;
}

const std::vector<std::string>& item_pool() {
  static const std::vector<std::string> v = {"lantern", "rose",   "coin",   "book",  "key",
                                             "apple",   "map",    "bell",   "ribbon", "hammer",
                                             "basket",  "flute",  "mirror", "candle", "crown",
                                             "shell",   "kite",   "quill",  "locket", "drum"};
  return v;
}

enum class EventKind { move, take, drop, meet, give, inspect };

// %e actor, %l location, %i item, %f co-actor ("friend")
struct EventTemplate {
  EventKind kind;
  std::vector<std::string> words;
};

// Interleaved so that small template budgets still include the state-changing
// kinds that keep the enabled-event set nonempty.
const std::vector<EventTemplate>& template_pool() {
  static const std::vector<EventTemplate> v = {
      {EventKind::move, {"%e", "went", "to", "the", "%l"}},
      {EventKind::take, {"%e", "took", "the", "%i"}},
      {EventKind::meet, {"%e", "saw", "%f"}},
      {EventKind::give, {"%e", "gave", "the", "%i", "to", "%f"}},
      {EventKind::drop, {"%e", "dropped", "the", "%i"}},
      {EventKind::inspect, {"%e", "examined", "the", "%i"}},
      {EventKind::move, {"%e", "walked", "to", "the", "%l"}},
      {EventKind::take, {"%e", "picked", "up", "the", "%i"}},
      {EventKind::meet, {"%e", "greeted", "%f"}},
      {EventKind::give, {"%e", "handed", "the", "%i", "to", "%f"}},
      {EventKind::drop, {"%e", "put", "down", "the", "%i"}},
      {EventKind::inspect, {"%e", "studied", "the", "%i"}},
      {EventKind::move, {"%e", "returned", "to", "the", "%l"}},
      {EventKind::take, {"%e", "grabbed", "the", "%i"}},
      {EventKind::meet, {"%e", "met", "%f"}},
      {EventKind::move, {"%e", "hurried", "to", "the", "%l"}},
  };
  return v;
}

struct Event {
  int tmpl = -1;
  int actor = -1;
  int loc = -1;
  int item = -1;
  int other = -1;
};

// World state during generation: everything known.
struct WorldState {
  std::vector<int> entity_loc;           // entity -> location
  std::vector<int> item_holder;          // item -> entity or -1
  std::vector<int> item_loc;             // item -> location (valid when unheld)
};

// Checker state: facts bound lazily from the narrative. -2 means unknown.
struct LazyState {
  std::vector<int> entity_loc;
  std::vector<int> item_holder;  // -2 unknown, -1 unheld, else entity
  std::vector<int> item_loc;     // -2 unknown
};

class StoryWorld {
 public:
  explicit StoryWorld(const StoryWorldConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    const auto& ep = entity_pool();
    const auto& lp = location_pool();
    const auto& ip = item_pool();
    n_items_ = std::min(cfg.n_entities + 2, static_cast<int>(ip.size()));
    if (cfg.n_entities > static_cast<int>(ep.size()) ||
        cfg.n_locations > static_cast<int>(lp.size())) {
      throw std::invalid_argument("story world exceeds the configured name pools");
    }
    std::uint64_t off = cfg.grammar_seed;
    for (int i = 0; i < cfg.n_entities; ++i) {
      entities_.push_back(ep[(i + off) % ep.size()]);
    }
    for (int i = 0; i < cfg.n_locations; ++i) {
      locations_.push_back(lp[(i + off) % lp.size()]);
    }
    for (int i = 0; i < n_items_; ++i) items_.push_back(ip[(i + off) % ip.size()]);

    int n_tmpl = std::min(cfg.n_event_templates, static_cast<int>(template_pool().size()));
    for (int i = 0; i < n_tmpl; ++i) templates_.push_back(template_pool()[i]);
  }

  Corpus generate(std::uint64_t seed, int n_stories) const;
  double acceptance_rate(const Corpus& corpus) const;

 private:
  std::vector<std::string> render(const Event& ev) const;
  bool parse(const Vocabulary& vocab, std::span<const int> tokens, Event* out) const;
  WorldState initial_state(Rng& rng) const;
  bool valid(const WorldState& s, const Event& ev) const;
  void apply(WorldState& s, const Event& ev) const;
  bool check_and_bind(LazyState& s, const Event& ev) const;
  std::vector<Event> enabled_events(const WorldState& s, int actor) const;
  Event random_event(Rng& rng) const;

  StoryWorldConfig cfg_;
  int n_items_ = 0;
  std::vector<std::string> entities_, locations_, items_;
  std::vector<EventTemplate> templates_;
};

std::vector<std::string> StoryWorld::render(const Event& ev) const {
  std::vector<std::string> out;
  for (const auto& w : templates_[static_cast<std::size_t>(ev.tmpl)].words) {
    if (w == "%e") out.push_back(entities_[static_cast<std::size_t>(ev.actor)]);
    else if (w == "%l") out.push_back(locations_[static_cast<std::size_t>(ev.loc)]);
    else if (w == "%i") out.push_back(items_[static_cast<std::size_t>(ev.item)]);
    else if (w == "%f") out.push_back(entities_[static_cast<std::size_t>(ev.other)]);
    else out.push_back(w);
  }
  out.push_back(".");
  return out;
}

bool StoryWorld::parse(const Vocabulary& vocab, std::span<const int> tokens, Event* out) const {
  auto find_name = [](const std::vector<std::string>& pool, const std::string& w) {
    auto it = std::find(pool.begin(), pool.end(), w);
    return it == pool.end() ? -1 : static_cast<int>(it - pool.begin());
  };
  for (std::size_t ti = 0; ti < templates_.size(); ++ti) {
    const auto& words = templates_[ti].words;
    if (tokens.size() != words.size() + 1) continue;  // trailing period
    Event ev;
    ev.tmpl = static_cast<int>(ti);
    bool ok = true;
    for (std::size_t i = 0; i < words.size() && ok; ++i) {
      const std::string& tok = vocab.token(tokens[i]);
      const std::string& w = words[i];
      if (w == "%e") ok = (ev.actor = find_name(entities_, tok)) >= 0;
      else if (w == "%l") ok = (ev.loc = find_name(locations_, tok)) >= 0;
      else if (w == "%i") ok = (ev.item = find_name(items_, tok)) >= 0;
      else if (w == "%f") ok = (ev.other = find_name(entities_, tok)) >= 0;
      else ok = (tok == w);
    }
    if (ok && vocab.token(tokens[words.size()]) == ".") {
      *out = ev;
      return true;
    }
  }
  return false;
}

WorldState StoryWorld::initial_state(Rng& rng) const {
  WorldState s;
  s.entity_loc.resize(static_cast<std::size_t>(cfg_.n_entities));
  for (auto& l : s.entity_loc) l = rng.uniform_int(cfg_.n_locations);
  s.item_holder.assign(static_cast<std::size_t>(n_items_), -1);
  s.item_loc.resize(static_cast<std::size_t>(n_items_));
  for (auto& l : s.item_loc) l = rng.uniform_int(cfg_.n_locations);
  return s;
}

bool StoryWorld::valid(const WorldState& s, const Event& ev) const {
  switch (templates_[static_cast<std::size_t>(ev.tmpl)].kind) {
    case EventKind::move: return s.entity_loc[ev.actor] != ev.loc;
    case EventKind::take:
      return s.item_holder[ev.item] == -1 && s.item_loc[ev.item] == s.entity_loc[ev.actor];
    case EventKind::drop: return s.item_holder[ev.item] == ev.actor;
    case EventKind::meet:
      return ev.actor != ev.other && s.entity_loc[ev.actor] == s.entity_loc[ev.other];
    case EventKind::give:
      return ev.actor != ev.other && s.item_holder[ev.item] == ev.actor &&
             s.entity_loc[ev.actor] == s.entity_loc[ev.other];
    case EventKind::inspect:
      return s.item_holder[ev.item] == ev.actor ||
             (s.item_holder[ev.item] == -1 && s.item_loc[ev.item] == s.entity_loc[ev.actor]);
  }
  return false;
}

void StoryWorld::apply(WorldState& s, const Event& ev) const {
  switch (templates_[static_cast<std::size_t>(ev.tmpl)].kind) {
    case EventKind::move: s.entity_loc[ev.actor] = ev.loc; break;
    case EventKind::take:
      s.item_holder[ev.item] = ev.actor;
      break;
    case EventKind::drop:
      s.item_holder[ev.item] = -1;
      s.item_loc[ev.item] = s.entity_loc[ev.actor];
      break;
    case EventKind::give: s.item_holder[ev.item] = ev.other; break;
    case EventKind::meet:
    case EventKind::inspect: break;
  }
}

// Accepts the event if its preconditions are consistent with what the story
// has established so far; unknown facts are bound rather than rejected, and
// postconditions always update the narrative state.
bool StoryWorld::check_and_bind(LazyState& s, const Event& ev) const {
  bool ok = true;
  switch (templates_[static_cast<std::size_t>(ev.tmpl)].kind) {
    case EventKind::move:
      ok = s.entity_loc[ev.actor] != ev.loc;  // unknown (-2) differs from any location
      s.entity_loc[ev.actor] = ev.loc;
      break;
    case EventKind::take: {
      int holder = s.item_holder[ev.item];
      if (holder >= 0) ok = false;
      if (ok && s.item_loc[ev.item] != -2) {
        if (s.entity_loc[ev.actor] == -2) s.entity_loc[ev.actor] = s.item_loc[ev.item];
        else ok = s.item_loc[ev.item] == s.entity_loc[ev.actor];
      }
      s.item_holder[ev.item] = ev.actor;
      s.item_loc[ev.item] = -2;
      break;
    }
    case EventKind::drop: {
      int holder = s.item_holder[ev.item];
      if (holder != -2) ok = holder == ev.actor;
      s.item_holder[ev.item] = -1;
      s.item_loc[ev.item] = s.entity_loc[ev.actor];  // may stay unknown
      break;
    }
    case EventKind::meet: {
      if (ev.actor == ev.other) ok = false;
      int la = s.entity_loc[ev.actor], lb = s.entity_loc[ev.other];
      if (la != -2 && lb != -2) ok = ok && la == lb;
      else if (la != -2) s.entity_loc[ev.other] = la;
      else if (lb != -2) s.entity_loc[ev.actor] = lb;
      break;
    }
    case EventKind::give: {
      if (ev.actor == ev.other) ok = false;
      int holder = s.item_holder[ev.item];
      if (holder != -2) ok = ok && holder == ev.actor;
      int la = s.entity_loc[ev.actor], lb = s.entity_loc[ev.other];
      if (la != -2 && lb != -2) ok = ok && la == lb;
      else if (la != -2) s.entity_loc[ev.other] = la;
      else if (lb != -2) s.entity_loc[ev.actor] = lb;
      s.item_holder[ev.item] = ev.other;
      break;
    }
    case EventKind::inspect: {
      int holder = s.item_holder[ev.item];
      if (holder >= 0 && holder != ev.actor) ok = false;
      if (holder == -1 && s.item_loc[ev.item] != -2) {
        if (s.entity_loc[ev.actor] == -2) s.entity_loc[ev.actor] = s.item_loc[ev.item];
        else ok = ok && s.item_loc[ev.item] == s.entity_loc[ev.actor];
      }
      break;
    }
  }
  return ok;
}

std::vector<Event> StoryWorld::enabled_events(const WorldState& s, int actor) const {
  std::vector<Event> out;
  for (std::size_t ti = 0; ti < templates_.size(); ++ti) {
    Event ev;
    ev.tmpl = static_cast<int>(ti);
    ev.actor = actor;
    switch (templates_[ti].kind) {
      case EventKind::move:
        for (int l = 0; l < cfg_.n_locations; ++l) {
          if (l != s.entity_loc[actor]) {
            ev.loc = l;
            out.push_back(ev);
          }
        }
        break;
      case EventKind::take:
      case EventKind::inspect:
      case EventKind::drop:
        for (int i = 0; i < n_items_; ++i) {
          ev.item = i;
          if (valid(s, ev)) out.push_back(ev);
        }
        break;
      case EventKind::meet:
        for (int o = 0; o < cfg_.n_entities; ++o) {
          ev.other = o;
          if (valid(s, ev)) out.push_back(ev);
        }
        break;
      case EventKind::give:
        for (int i = 0; i < n_items_; ++i) {
          for (int o = 0; o < cfg_.n_entities; ++o) {
            ev.item = i;
            ev.other = o;
            if (valid(s, ev)) out.push_back(ev);
          }
        }
        break;
    }
  }
  return out;
}

Event StoryWorld::random_event(Rng& rng) const {
  Event ev;
  ev.tmpl = rng.uniform_int(static_cast<int>(templates_.size()));
  ev.actor = rng.uniform_int(cfg_.n_entities);
  switch (templates_[static_cast<std::size_t>(ev.tmpl)].kind) {
    case EventKind::move: ev.loc = rng.uniform_int(cfg_.n_locations); break;
    case EventKind::take:
    case EventKind::drop:
    case EventKind::inspect: ev.item = rng.uniform_int(n_items_); break;
    case EventKind::meet:
      ev.other = (ev.actor + 1 + rng.uniform_int(cfg_.n_entities - 1)) % cfg_.n_entities;
      break;
    case EventKind::give:
      ev.item = rng.uniform_int(n_items_);
      ev.other = (ev.actor + 1 + rng.uniform_int(cfg_.n_entities - 1)) % cfg_.n_entities;
      break;
  }
  return ev;
}

Corpus StoryWorld::generate(std::uint64_t seed, int n_stories) const {
  Corpus corpus;
  corpus.name = "world-" + std::to_string(seed);
  Rng root(seed_mix(seed, 0x57524c44ULL));
  for (int si = 0; si < n_stories; ++si) {
    Rng rng = root.derive(static_cast<std::uint64_t>(si) + 1);
    WorldState state = initial_state(rng);
    int length = cfg_.min_sentences + rng.uniform_int(cfg_.max_sentences - cfg_.min_sentences + 1);
    Story story;
    story.id = "synth-" + std::to_string(seed) + "-" + std::to_string(si);
    story.source = corpus.name;
    int prev_actor = -1;
    for (int t = 0; t < length; ++t) {
      Event ev;
      if (rng.uniform() < cfg_.coherence) {
        int actor = -1;
        if (prev_actor >= 0 && rng.uniform() < cfg_.protagonist_persistence) actor = prev_actor;
        if (actor < 0) actor = rng.uniform_int(cfg_.n_entities);
        std::vector<Event> options = enabled_events(state, actor);
        if (options.empty()) {
          // move is always enabled for any actor with >= 2 locations
          options = enabled_events(state, rng.uniform_int(cfg_.n_entities));
        }
        // draw the event kind first so item interactions are not drowned out
        // by the much larger set of enabled moves
        std::vector<EventKind> kinds;
        for (const Event& e : options) {
          EventKind k = templates_[static_cast<std::size_t>(e.tmpl)].kind;
          if (std::find(kinds.begin(), kinds.end(), k) == kinds.end()) kinds.push_back(k);
        }
        EventKind kind = kinds[static_cast<std::size_t>(
            rng.uniform_int(static_cast<int>(kinds.size())))];
        std::vector<Event> of_kind;
        for (const Event& e : options) {
          if (templates_[static_cast<std::size_t>(e.tmpl)].kind == kind) of_kind.push_back(e);
        }
        ev = of_kind[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(of_kind.size())))];
      } else {
        ev = random_event(rng);
      }
      apply(state, ev);
      prev_actor = ev.actor;
      std::vector<int> sentence;
      for (const auto& w : render(ev)) sentence.push_back(corpus.vocab.add(w));
      story.sentences.push_back(std::move(sentence));
    }
    corpus.stories.push_back(std::move(story));
  }
  corpus.validate();
  return corpus;
}

double StoryWorld::acceptance_rate(const Corpus& corpus) const {
  std::int64_t accepted = 0, total = 0;
  for (const auto& story : corpus.stories) {
    LazyState s;
    s.entity_loc.assign(static_cast<std::size_t>(cfg_.n_entities), -2);
    s.item_holder.assign(static_cast<std::size_t>(n_items_), -2);
    s.item_loc.assign(static_cast<std::size_t>(n_items_), -2);
    for (const auto& sentence : story.sentences) {
      ++total;
      Event ev;
      if (!parse(corpus.vocab, sentence, &ev)) continue;  // unparseable counts as rejected
      if (check_and_bind(s, ev)) ++accepted;
    }
  }
  if (total == 0) throw std::invalid_argument("acceptance_rate: empty corpus");
  return static_cast<double>(accepted) / static_cast<double>(total);
}

}  // namespace

Corpus generate_story_world(const StoryWorldConfig& config, std::uint64_t seed, int n_stories) {
  if (n_stories < 1) throw std::invalid_argument("generate_story_world: n_stories must be >= 1");
  return StoryWorld(config).generate(seed, n_stories);
}

double transition_acceptance_rate(const StoryWorldConfig& config, const Corpus& corpus) {
  return StoryWorld(config).acceptance_rate(corpus);
}

// ---------------------------------------------------------------------------
// key=value config file
// ---------------------------------------------------------------------------

StoryWorldConfig story_world_config_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read story world config: " + path);
  StoryWorldConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key == "n_entities") cfg.n_entities = std::stoi(value);
    else if (key == "n_locations") cfg.n_locations = std::stoi(value);
    else if (key == "n_event_templates") cfg.n_event_templates = std::stoi(value);
    else if (key == "min_sentences") cfg.min_sentences = std::stoi(value);
    else if (key == "max_sentences") cfg.max_sentences = std::stoi(value);
    else if (key == "coherence") cfg.coherence = std::stod(value);
    else if (key == "protagonist_persistence") cfg.protagonist_persistence = std::stod(value);
    else if (key == "grammar_seed") cfg.grammar_seed = std::stoull(value);
    else throw std::runtime_error(path + ":" + std::to_string(line_no) + ": unknown key " + key);
  }
  cfg.validate();
  return cfg;
}

std::string story_world_config_to_text(const StoryWorldConfig& cfg) {
  std::ostringstream out;
  out << "n_entities = " << cfg.n_entities << "\n";
  out << "n_locations = " << cfg.n_locations << "\n";
  out << "n_event_templates = " << cfg.n_event_templates << "\n";
  out << "min_sentences = " << cfg.min_sentences << "\n";
  out << "max_sentences = " << cfg.max_sentences << "\n";
  out << "coherence = " << cfg.coherence << "\n";
  out << "protagonist_persistence = " << cfg.protagonist_persistence << "\n";
  out << "grammar_seed = " << cfg.grammar_seed << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// plain-text ingestion
// ---------------------------------------------------------------------------

namespace {

bool is_abbreviation(const std::string& word) {
  static const std::set<std::string> guard = {"mr", "mrs", "ms", "dr",  "st", "prof",
                                              "jr", "sr",  "vs", "etc", "no", "fig"};
  std::string lower;
  for (char c : word) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (guard.count(lower)) return true;
  return word.size() == 1 && std::isupper(static_cast<unsigned char>(word[0]));  // initials
}

// split one physical line into sentence strings
std::vector<std::string> split_sentences(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (c != '.' && c != '!' && c != '?') continue;
    // the word immediately before the terminator
    std::size_t w_end = i;
    std::size_t w_begin = w_end;
    while (w_begin > start && !std::isspace(static_cast<unsigned char>(line[w_begin - 1]))) {
      --w_begin;
    }
    if (c == '.' && is_abbreviation(line.substr(w_begin, w_end - w_begin))) continue;
    // boundary only when whitespace then a capital follows
    std::size_t j = i + 1;
    while (j < line.size() && (line[j] == '.' || line[j] == '!' || line[j] == '?')) ++j;
    std::size_t k = j;
    while (k < line.size() && std::isspace(static_cast<unsigned char>(line[k]))) ++k;
    if (k == line.size() || (k > j && std::isupper(static_cast<unsigned char>(line[k])))) {
      out.push_back(line.substr(start, j - start));
      start = k;
      i = k ? k - 1 : 0;
    }
  }
  if (start < line.size()) {
    std::string rest = line.substr(start);
    if (rest.find_first_not_of(" \t\r") != std::string::npos) out.push_back(rest);
  }
  return out;
}

std::vector<std::string> tokenize(const std::string& sentence) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : sentence) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) tokens.push_back(std::exchange(cur, {}));
    } else if (std::isalnum(static_cast<unsigned char>(c)) || c == '\'') {
      cur.push_back(c);
    } else {
      if (!cur.empty()) tokens.push_back(std::exchange(cur, {}));
      tokens.push_back(std::string(1, c));
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

Corpus ingest_impl(const std::string& path, const Vocabulary* fixed_vocab) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read corpus file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw std::runtime_error("empty corpus file: " + path);
  }

  Corpus corpus;
  corpus.name = path;
  if (fixed_vocab) corpus.vocab = *fixed_vocab;

  std::vector<std::string> chunk_lines;
  int story_index = 0;
  auto flush_story = [&] {
    if (chunk_lines.empty()) return;
    Story story;
    story.id = path + "#" + std::to_string(story_index++);
    story.source = path;
    for (const auto& line : chunk_lines) {
      for (const auto& sent : split_sentences(line)) {
        std::vector<int> ids;
        for (const auto& tok : tokenize(sent)) {
          ids.push_back(fixed_vocab ? corpus.vocab.lookup(tok) : corpus.vocab.add(tok));
        }
        if (!ids.empty()) story.sentences.push_back(std::move(ids));
      }
    }
    chunk_lines.clear();
    if (story.sentences.empty()) {
      throw std::runtime_error("story with zero sentences after splitting: " + story.id);
    }
    corpus.stories.push_back(std::move(story));
  };

  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      flush_story();
    } else {
      chunk_lines.push_back(line);
    }
  }
  flush_story();
  if (corpus.stories.empty()) throw std::runtime_error("no stories in corpus file: " + path);
  corpus.validate();
  return corpus;
}

}  // namespace

Corpus ingest_plain_text(const std::string& path) { return ingest_impl(path, nullptr); }

Corpus ingest_plain_text(const std::string& path, const Vocabulary& vocab) {
  return ingest_impl(path, &vocab);
}

void save_corpus(const Corpus& corpus, const std::string& text_path) {
  std::ofstream out(text_path);
  if (!out) throw std::runtime_error("cannot write corpus file: " + text_path);
  for (std::size_t si = 0; si < corpus.stories.size(); ++si) {
    if (si) out << "\n";
    for (const auto& sentence : corpus.stories[si].sentences) {
      out << sentence_to_text(corpus.vocab, sentence) << "\n";
    }
  }
}

std::string sentence_to_text(const Vocabulary& vocab, std::span<const int> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += vocab.token(tokens[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// splits and batches
// ---------------------------------------------------------------------------

SplitResult split_corpus(const Corpus& corpus, const std::array<double, 3>& ratios,
                         std::uint64_t seed) {
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::fabs(sum - 1.0) > 1e-9) throw std::invalid_argument("split ratios must sum to 1");
  int n = static_cast<int>(corpus.stories.size());
  if (n < 3) throw std::invalid_argument("corpus smaller than 3 stories");

  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(seed_mix(seed, 0x53504c54ULL));
  for (int i = n - 1; i > 0; --i) {
    int j = rng.uniform_int(i + 1);
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }

  // floor allocation, remainders to the largest fractional parts
  std::array<int, 3> sizes{};
  std::array<double, 3> frac{};
  int assigned = 0;
  for (int k = 0; k < 3; ++k) {
    double exact = ratios[static_cast<std::size_t>(k)] * n;
    sizes[static_cast<std::size_t>(k)] = static_cast<int>(std::floor(exact));
    frac[static_cast<std::size_t>(k)] = exact - std::floor(exact);
    assigned += sizes[static_cast<std::size_t>(k)];
  }
  while (assigned < n) {
    int best = 0;
    for (int k = 1; k < 3; ++k) {
      if (frac[static_cast<std::size_t>(k)] > frac[static_cast<std::size_t>(best)]) best = k;
    }
    sizes[static_cast<std::size_t>(best)]++;
    frac[static_cast<std::size_t>(best)] = -1.0;
    ++assigned;
  }

  SplitResult result;
  Corpus* parts[3] = {&result.train, &result.valid, &result.test};
  const char* suffix[3] = {"/train", "/valid", "/test"};
  int cursor = 0;
  for (int k = 0; k < 3; ++k) {
    parts[k]->name = corpus.name + suffix[k];
    parts[k]->vocab = corpus.vocab;
    for (int i = 0; i < sizes[static_cast<std::size_t>(k)]; ++i) {
      parts[k]->stories.push_back(corpus.stories[static_cast<std::size_t>(order[cursor++])]);
    }
  }
  return result;
}

std::vector<StoryBlock> sample_batch(std::span<const Corpus* const> corpora, int block_sentences,
                                     int blocks_per_batch, Rng& rng) {
  if (block_sentences < 2) throw std::invalid_argument("block_sentences must be >= 2");
  if (blocks_per_batch < 1) throw std::invalid_argument("blocks_per_batch must be >= 1");
  std::int64_t total = 0;
  for (const Corpus* c : corpora) total += static_cast<std::int64_t>(c->stories.size());
  if (total == 0) throw std::invalid_argument("sample_batch: all corpora empty");

  std::vector<StoryBlock> out;
  out.reserve(static_cast<std::size_t>(blocks_per_batch));
  for (int b = 0; b < blocks_per_batch; ++b) {
    std::int64_t pick = static_cast<std::int64_t>(rng.next_u64() % static_cast<std::uint64_t>(total));
    int ci = 0;
    for (std::size_t k = 0; k < corpora.size(); ++k) {
      std::int64_t count = static_cast<std::int64_t>(corpora[k]->stories.size());
      if (pick < count) {
        ci = static_cast<int>(k);
        break;
      }
      pick -= count;
    }
    const Corpus& c = *corpora[static_cast<std::size_t>(ci)];
    int si = rng.uniform_int(static_cast<int>(c.stories.size()));
    int len = c.stories[static_cast<std::size_t>(si)].length();
    StoryBlock block;
    block.corpus = ci;
    block.story = si;
    if (len <= block_sentences) {
      block.begin = 0;
      block.end = len;
    } else {
      block.begin = rng.uniform_int(len - block_sentences + 1);
      block.end = block.begin + block_sentences;
    }
    out.push_back(block);
  }
  return out;
}

}  // namespace loom
