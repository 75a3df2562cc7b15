// SPDX-License-Identifier: Apache-2.0
#include "herl/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace herl::config {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (begin != end && *begin == '+') ++begin;
  const auto res = std::from_chars(begin, end, v);
  if (text.empty() || res.ec != std::errc() || res.ptr != end)
    throw ConfigError("config: key '" + key + "' expects a number, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("config: key '" + key + "' expects true/false, got '" + text + "'");
}

std::string unquote(const std::string& text) {
  if (text.size() >= 2 && (text.front() == '"' || text.front() == '\'') && text.back() == text.front())
    return text.substr(1, text.size() - 2);
  return text;
}

std::vector<Index> parse_widths(const std::string& key, const std::string& text) {
  std::string body = text;
  if (!body.empty() && body.front() == '[' && body.back() == ']') body = body.substr(1, body.size() - 2);
  std::vector<Index> out;
  std::stringstream in(body);
  std::string cell;
  while (std::getline(in, cell, ',')) out.push_back(parse_number<Index>(key, trim(cell)));
  return out;
}

struct Key {
  const char* name;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
std::string show(T v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_floating_point_v<T>) {
    return data::format_double(v);
  } else {
    return std::to_string(v);
  }
}

#define HERL_NUM(key, field)                                                                          \
  Key {                                                                                               \
    key, [](RunConfig& c, const std::string& k, const std::string& v) {                               \
      c.field = parse_number<std::decay_t<decltype(c.field)>>(k, v);                                  \
    },                                                                                                \
        [](const RunConfig& c) { return show(c.field); }                                              \
  }
#define HERL_BOOL(key, field)                                                                         \
  Key {                                                                                               \
    key, [](RunConfig& c, const std::string& k, const std::string& v) { c.field = parse_bool(k, v); }, \
        [](const RunConfig& c) { return show(c.field); }                                              \
  }
#define HERL_STR(key, field)                                                                          \
  Key {                                                                                               \
    key, [](RunConfig& c, const std::string&, const std::string& v) { c.field = v; },                 \
        [](const RunConfig& c) { return "\"" + c.field + "\""; }                                      \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      HERL_STR("dataset", dataset),
      HERL_STR("out", out),
      HERL_NUM("c", hyp.c),
      HERL_NUM("cr", hyp.cr),
      HERL_NUM("eps", hyp.eps),
      HERL_NUM("sigma", graph.sigma),
      HERL_NUM("walk_steps", graph.steps),
      HERL_NUM("xi", graph.xi),
      HERL_NUM("warmup", graph.warmup_epochs),
      HERL_NUM("tau", loss.tau),
      HERL_NUM("tau_dist", loss.tau_dist),
      HERL_NUM("beta", loss.beta),
      HERL_NUM("alpha", loss.alpha_final),
      HERL_BOOL("use_ang", loss.use_ang),
      HERL_BOOL("use_dis", loss.use_dis),
      HERL_BOOL("use_pro", loss.use_pro),
      Key{"hidden", [](RunConfig& c, const std::string& k, const std::string& v) { c.hidden = parse_widths(k, v); },
          [](const RunConfig& c) {
            std::string s;
            for (std::size_t i = 0; i < c.hidden.size(); ++i) s += (i ? "," : "") + std::to_string(c.hidden[i]);
            return "\"" + s + "\"";
          }},
      HERL_NUM("embed_dim", embed_dim),
      HERL_NUM("prototypes", prototypes),
      HERL_BOOL("prototype_softmax", prototype_softmax),
      HERL_NUM("epochs", epochs),
      HERL_NUM("batch_size", batch_size),
      HERL_NUM("lr", lr),
      HERL_NUM("momentum", momentum),
      HERL_NUM("seed", seed),
      HERL_NUM("clusters", clusters),
      HERL_NUM("kmeans_restarts", kmeans_restarts),
      HERL_NUM("kmeans_max_iter", kmeans_max_iter),
      HERL_NUM("branching", synth.tree.branching),
      HERL_NUM("depth", synth.tree.depth),
      HERL_NUM("samples_per_class", synth.samples_per_class),
      HERL_NUM("dim1", synth.dim1),
      HERL_NUM("dim2", synth.dim2),
      HERL_NUM("center_step", synth.center_step),
      HERL_NUM("noise", synth.noise),
      HERL_NUM("cross_view", synth.cross_view),
      HERL_NUM("synth_seed", synth.seed),
      HERL_NUM("eta", mask.eta),
      HERL_NUM("mask_seed", mask.seed),
  };
  return table;
}

#undef HERL_NUM
#undef HERL_BOOL
#undef HERL_STR

}  // namespace

void RunConfig::validate() const {
  hyp.validate();
  graph.validate();
  loss.validate();
  if (hidden.empty()) throw ConfigError("config: hidden must list at least one width");
  for (Index w : hidden)
    if (w < 1) throw ConfigError("config: hidden widths must be >= 1");
  if (embed_dim < 2) throw ConfigError("config: embed_dim must be >= 2");
  if (prototypes < 1) throw ConfigError("config: prototypes must be >= 1");
  if (epochs < 0) throw ConfigError("config: epochs must be >= 0");
  if (batch_size < 2) throw ConfigError("config: batch_size must be >= 2");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("config: lr must be finite and >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("config: momentum must lie in [0, 1)");
  if (clusters < 0) throw ConfigError("config: clusters must be >= 0");
  if (kmeans_restarts < 1 || kmeans_max_iter < 1) throw ConfigError("config: k-means restarts/max_iter must be >= 1");
  synth.validate();
  mask.validate();
}

void set_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const Key& k : keys())
    if (key == k.name) {
      k.set(cfg, key, unquote(trim(value)));
      return;
    }
  throw ConfigError("config: unknown key '" + key + "'");
}

void apply_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // strip comments outside quotes
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    try {
      set_value(cfg, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

RunConfig load(const std::filesystem::path& file, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open config " + file.string());
    std::stringstream buf;
    buf << in.rdbuf();
    apply_text(cfg, buf.str(), file.string());
  }
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    set_value(cfg, trim(o.substr(0, eq)), o.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

std::vector<std::pair<std::string, std::string>> entries(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Key& k : keys()) out.emplace_back(k.name, k.get(cfg));
  return out;
}

std::string render(const RunConfig& cfg) {
  std::string s;
  for (const auto& [k, v] : entries(cfg)) s += k + " = " + v + "\n";
  return s;
}

}  // namespace herl::config
