// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#include "loom/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace loom {

void RunConfig::validate() const {
  if (model != "tdvae" && model != "lstm" && model != "transformer") {
    throw std::invalid_argument("model must be tdvae, lstm or transformer");
  }
  if (precision != "double" && precision != "single") {
    throw std::invalid_argument("precision must be double or single");
  }
  if (batches_per_epoch < 1 || max_epochs < 1) throw std::invalid_argument("bad schedule");
  if (patience < 0) throw std::invalid_argument("patience must be >= 0");
  if (learning_rate <= 0.0) throw std::invalid_argument("learning rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("momentum in [0,1)");
  if (block_sentences < 3) throw std::invalid_argument("block_sentences must be >= 3");
  if (blocks_per_batch < 1) throw std::invalid_argument("blocks_per_batch must be >= 1");
  if (psa_every < 1) throw std::invalid_argument("psa_every must be >= 1");
  if (gen_beam < 1 || gen_candidates < 1 || gen_beam > gen_candidates) {
    throw std::invalid_argument("need 1 <= beam <= candidates");
  }
  if (gen_top_p <= 0.0 || gen_top_p > 1.0) throw std::invalid_argument("top_p in (0,1]");
  if (gen_steps < 1) throw std::invalid_argument("gen_steps must be >= 1");
  if (eval_stories < 1) throw std::invalid_argument("eval_stories must be >= 1");
  double rsum = split_ratios[0] + split_ratios[1] + split_ratios[2];
  if (std::fabs(rsum - 1.0) > 1e-9) throw std::invalid_argument("split ratios must sum to 1");
  encoder.validate();
  tdvae.validate();
  world.validate();
}

namespace {

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
T parse_number(const std::string& v);
template <>
int parse_number<int>(const std::string& v) { return std::stoi(v); }
template <>
double parse_number<double>(const std::string& v) { return std::stod(v); }
template <>
std::uint64_t parse_number<std::uint64_t>(const std::string& v) { return std::stoull(v); }

template <class T>
std::string show(const T& v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

std::map<std::string, Field> field_table() {
  std::map<std::string, Field> t;
  auto num = [&t](const std::string& key, auto member) {
    using M = std::decay_t<decltype(std::declval<RunConfig>().*member)>;
    t[key] = Field{[member](RunConfig& c, const std::string& v) { c.*member = parse_number<M>(v); },
                   [member](const RunConfig& c) { return show(c.*member); }};
  };
  t["seed"] = Field{[](RunConfig& c, const std::string& v) { c.seed = std::stoull(v); },
                    [](const RunConfig& c) { return show(c.seed); }};
  t["model"] = Field{[](RunConfig& c, const std::string& v) { c.model = v; },
                     [](const RunConfig& c) { return c.model; }};
  t["precision"] = Field{[](RunConfig& c, const std::string& v) { c.precision = v; },
                         [](const RunConfig& c) { return c.precision; }};

  t["lm.n_layers"] = Field{[](RunConfig& c, const std::string& v) { c.lm.n_layers = std::stoi(v); },
                           [](const RunConfig& c) { return show(c.lm.n_layers); }};
  t["lm.hidden"] = Field{[](RunConfig& c, const std::string& v) { c.lm.hidden = std::stoi(v); },
                         [](const RunConfig& c) { return show(c.lm.hidden); }};
  t["lm.n_heads"] = Field{[](RunConfig& c, const std::string& v) { c.lm.n_heads = std::stoi(v); },
                          [](const RunConfig& c) { return show(c.lm.n_heads); }};
  t["lm.context"] = Field{[](RunConfig& c, const std::string& v) { c.lm.context = std::stoi(v); },
                          [](const RunConfig& c) { return show(c.lm.context); }};

  t["encoder.depth"] =
      Field{[](RunConfig& c, const std::string& v) { c.encoder.depth = std::stoi(v); },
            [](const RunConfig& c) { return show(c.encoder.depth); }};
  t["encoder.width"] =
      Field{[](RunConfig& c, const std::string& v) { c.encoder.width = std::stoi(v); },
            [](const RunConfig& c) { return show(c.encoder.width); }};
  t["encoder.n_heads"] =
      Field{[](RunConfig& c, const std::string& v) { c.encoder.n_heads = std::stoi(v); },
            [](const RunConfig& c) { return show(c.encoder.n_heads); }};
  t["encoder.max_tokens"] =
      Field{[](RunConfig& c, const std::string& v) { c.encoder.max_tokens = std::stoi(v); },
            [](const RunConfig& c) { return show(c.encoder.max_tokens); }};

  t["tdvae.belief_width"] =
      Field{[](RunConfig& c, const std::string& v) { c.tdvae.belief_width = std::stoi(v); },
            [](const RunConfig& c) { return show(c.tdvae.belief_width); }};
  t["tdvae.belief_layers"] =
      Field{[](RunConfig& c, const std::string& v) { c.tdvae.belief_layers = std::stoi(v); },
            [](const RunConfig& c) { return show(c.tdvae.belief_layers); }};
  t["tdvae.n_layers"] =
      Field{[](RunConfig& c, const std::string& v) { c.tdvae.n_layers = std::stoi(v); },
            [](const RunConfig& c) { return show(c.tdvae.n_layers); }};
  t["tdvae.latent_dim"] =
      Field{[](RunConfig& c, const std::string& v) { c.tdvae.latent_dim = std::stoi(v); },
            [](const RunConfig& c) { return show(c.tdvae.latent_dim); }};
  t["tdvae.head_hidden"] =
      Field{[](RunConfig& c, const std::string& v) { c.tdvae.head_hidden = std::stoi(v); },
            [](const RunConfig& c) { return show(c.tdvae.head_hidden); }};
  t["tdvae.max_jump"] =
      Field{[](RunConfig& c, const std::string& v) { c.tdvae.max_jump = std::stoi(v); },
            [](const RunConfig& c) { return show(c.tdvae.max_jump); }};
  t["tdvae.samples_per_block"] =
      Field{[](RunConfig& c, const std::string& v) { c.tdvae.samples_per_block = std::stoi(v); },
            [](const RunConfig& c) { return show(c.tdvae.samples_per_block); }};

  t["disc.width"] = Field{[](RunConfig& c, const std::string& v) { c.disc.width = std::stoi(v); },
                          [](const RunConfig& c) { return show(c.disc.width); }};
  t["disc.depth"] = Field{[](RunConfig& c, const std::string& v) { c.disc.depth = std::stoi(v); },
                          [](const RunConfig& c) { return show(c.disc.depth); }};
  t["disc.n_heads"] =
      Field{[](RunConfig& c, const std::string& v) { c.disc.n_heads = std::stoi(v); },
            [](const RunConfig& c) { return show(c.disc.n_heads); }};

  t["world.n_entities"] =
      Field{[](RunConfig& c, const std::string& v) { c.world.n_entities = std::stoi(v); },
            [](const RunConfig& c) { return show(c.world.n_entities); }};
  t["world.n_locations"] =
      Field{[](RunConfig& c, const std::string& v) { c.world.n_locations = std::stoi(v); },
            [](const RunConfig& c) { return show(c.world.n_locations); }};
  t["world.n_event_templates"] =
      Field{[](RunConfig& c, const std::string& v) { c.world.n_event_templates = std::stoi(v); },
            [](const RunConfig& c) { return show(c.world.n_event_templates); }};
  t["world.min_sentences"] =
      Field{[](RunConfig& c, const std::string& v) { c.world.min_sentences = std::stoi(v); },
            [](const RunConfig& c) { return show(c.world.min_sentences); }};
  t["world.max_sentences"] =
      Field{[](RunConfig& c, const std::string& v) { c.world.max_sentences = std::stoi(v); },
            [](const RunConfig& c) { return show(c.world.max_sentences); }};
  t["world.coherence"] =
      Field{[](RunConfig& c, const std::string& v) { c.world.coherence = std::stod(v); },
            [](const RunConfig& c) { return show(c.world.coherence); }};
  t["world.protagonist_persistence"] = Field{
      [](RunConfig& c, const std::string& v) { c.world.protagonist_persistence = std::stod(v); },
      [](const RunConfig& c) { return show(c.world.protagonist_persistence); }};
  t["world.grammar_seed"] =
      Field{[](RunConfig& c, const std::string& v) { c.world.grammar_seed = std::stoull(v); },
            [](const RunConfig& c) { return show(c.world.grammar_seed); }};
  t["synth.stories"] =
      Field{[](RunConfig& c, const std::string& v) { c.synth_stories = std::stoi(v); },
            [](const RunConfig& c) { return show(c.synth_stories); }};

  t["split.train"] =
      Field{[](RunConfig& c, const std::string& v) { c.split_ratios[0] = std::stod(v); },
            [](const RunConfig& c) { return show(c.split_ratios[0]); }};
  t["split.valid"] =
      Field{[](RunConfig& c, const std::string& v) { c.split_ratios[1] = std::stod(v); },
            [](const RunConfig& c) { return show(c.split_ratios[1]); }};
  t["split.test"] =
      Field{[](RunConfig& c, const std::string& v) { c.split_ratios[2] = std::stod(v); },
            [](const RunConfig& c) { return show(c.split_ratios[2]); }};

  num("train.batches_per_epoch", &RunConfig::batches_per_epoch);
  num("train.max_epochs", &RunConfig::max_epochs);
  num("train.patience", &RunConfig::patience);
  t["train.halve_lr"] = Field{
      [](RunConfig& c, const std::string& v) {
        if (v != "true" && v != "false") throw std::invalid_argument("halve_lr: true|false");
        c.halve_lr_on_plateau = v == "true";
      },
      [](const RunConfig& c) { return c.halve_lr_on_plateau ? "true" : "false"; }};
  num("train.learning_rate", &RunConfig::learning_rate);
  num("train.momentum", &RunConfig::momentum);
  num("train.block_sentences", &RunConfig::block_sentences);
  num("train.blocks_per_batch", &RunConfig::blocks_per_batch);
  num("train.psa_every", &RunConfig::psa_every);
  num("train.valid_blocks", &RunConfig::valid_blocks);

  num("gen.beam", &RunConfig::gen_beam);
  num("gen.candidates", &RunConfig::gen_candidates);
  num("gen.top_p", &RunConfig::gen_top_p);
  num("gen.steps", &RunConfig::gen_steps);
  num("gen.max_sentence_len", &RunConfig::gen_max_sentence_len);
  num("eval.stories", &RunConfig::eval_stories);
  return t;
}

}  // namespace

RunConfig run_config_from_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  auto table = field_table();
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    auto it = table.find(key);
    if (it == table.end()) {
      throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": unknown key " + key);
    }
    it->second.set(cfg, value);
  }
  cfg.disc.kind = cfg.model == "transformer" ? DiscriminatorConfig::Kind::transformer
                                             : DiscriminatorConfig::Kind::lstm;
  cfg.validate();
  return cfg;
}

RunConfig run_config_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return run_config_from_text(buf.str(), path);
}

std::string run_config_to_text(const RunConfig& cfg) {
  std::ostringstream out;
  out << "# loom run configuration (key = value, '#' comments)\n";
  auto table = field_table();
  for (const auto& [key, field] : table) {
    out << key << " = " << field.get(cfg);
    if (key == "lm.hidden") out << "  # full-scale reference: 1024";
    if (key == "lm.n_layers") out << "  # full-scale reference: 24";
    if (key == "lm.context") out << "  # full-scale reference: 1024";
    if (key == "encoder.width") out << "  # full-scale reference: 1024";
    if (key == "encoder.depth") out << "  # full-scale reference: 6";
    if (key == "gen.candidates") out << "  # 100 default; 50 is the reduced setting";
    out << "\n";
  }
  return out.str();
}

}  // namespace loom
