#pragma once

// Run configuration. Every key can come from three sources, highest priority
// first: a command-line flag (--group-size), the key=value config file
// (group_size = 8) and the environment (T1_GROUP_SIZE). Keys are applied in
// table order so that `stage` installs its weight preset before any explicit
// w_* override.

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "t1/error.hpp"
#include "t1/grpo.hpp"
#include "t1/losses.hpp"
#include "t1/protocol.hpp"
#include "t1/reward.hpp"
#include "t1/text.hpp"
#include "t1/toy_env.hpp"

namespace t1 {

struct Config {
  BackendDescriptor backend;
  std::string index_path = "t1.index";
  double tau = kDefaultRankTau;
  Stage stage = Stage::kStage2;
  StageLossWeights stage_weights = StageLossWeights::stage2();
  double nce_temperature = kDefaultNceTemperature;
  double triplet_margin = kDefaultTripletMargin;
  GrpoConfig grpo;
  std::size_t tasks = 32;
  double policy_temperature = 1.0;
  ToyEnvParams toy;
  FormatPolicy format_policy;

  ToyEnvParams toy_params() const {
    ToyEnvParams p = toy;
    p.tau = tau;
    return p;
  }

  void validate() const {
    require(backend.max_reasoning_tokens > 0, Errc::kInvalidInput, "max_reasoning_tokens must be positive");
    require(backend.dim > 0, Errc::kInvalidInput, "backend_dim must be positive");
    require(backend.kind != BackendKind::kRemoteService || !backend.endpoint.empty(), Errc::kInvalidInput,
            "remote backend needs backend_endpoint (or T1_BACKEND_ENDPOINT)");
    require(std::isfinite(tau) && tau > 0.0, Errc::kInvalidInput, "tau must be positive");
    require(std::isfinite(nce_temperature) && nce_temperature > 0.0, Errc::kInvalidInput,
            "nce_temperature must be positive");
    require(std::isfinite(triplet_margin) && triplet_margin >= 0.0, Errc::kInvalidInput,
            "triplet_margin must be >= 0");
    require(tasks > 0, Errc::kInvalidInput, "tasks must be positive");
    require(std::isfinite(policy_temperature) && policy_temperature > 0.0, Errc::kInvalidInput,
            "policy_temperature must be positive");
    stage_weights.validate();
    grpo.validate();
    toy_params().validate();
    format_policy.validate();
  }
};

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(Config&, const std::string&)> set;
  std::function<std::string(const Config&)> get;

  std::string flag() const {
    std::string f = "--" + name;
    std::replace(f.begin(), f.end(), '_', '-');
    return f;
  }

  std::string env_var() const {
    std::string e = "T1_" + name;
    for (char& c : e) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return e;
  }
};

namespace detail {

template <typename T>
T parse_value(const std::string& key, const std::string& value) {
  T out{};
  if constexpr (std::is_same_v<T, bool>) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    fail(Errc::kInvalidInput, "config key '" + key + "': expected a boolean, got '" + value + "'");
  } else {
    if (!parse_number(std::string_view(value), out)) {
      fail(Errc::kInvalidInput, "config key '" + key + "': cannot parse '" + value + "'");
    }
    return out;
  }
}

template <typename T>
std::string show(const T& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_floating_point_v<T>) {
    return to_shortest(v);
  } else {
    return std::to_string(v);
  }
}

template <typename T, typename Member>
ConfigKey numeric_key(std::string name, std::string help, Member member) {
  return {name, std::move(help),
          [member, name](Config& c, const std::string& v) { std::invoke(member, c) = parse_value<T>(name, v); },
          [member](const Config& c) { return show<T>(std::invoke(member, const_cast<Config&>(c))); }};
}

}  // namespace detail

inline const std::vector<ConfigKey>& config_keys() {
  using detail::numeric_key;
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    k.push_back({"backend", "encoding backend: mock or remote",
                 [](Config& c, const std::string& v) {
                   if (v == "mock") {
                     c.backend.kind = BackendKind::kDeterministicMock;
                   } else if (v == "remote") {
                     c.backend.kind = BackendKind::kRemoteService;
                   } else {
                     fail(Errc::kInvalidInput, "config key 'backend': expected mock or remote, got '" + v + "'");
                   }
                 },
                 [](const Config& c) {
                   return std::string(c.backend.kind == BackendKind::kRemoteService ? "remote" : "mock");
                 }});
    k.push_back({"backend_endpoint", "remote backend URL, e.g. http://127.0.0.1:8080/encode",
                 [](Config& c, const std::string& v) { c.backend.endpoint = v; },
                 [](const Config& c) { return c.backend.endpoint; }});
    k.push_back(numeric_key<std::uint64_t>("backend_seed", "mock backend hash seed",
                                           [](Config& c) -> auto& { return c.backend.seed; }));
    k.push_back(numeric_key<std::size_t>("backend_dim", "mock backend embedding dimension",
                                         [](Config& c) -> auto& { return c.backend.dim; }));
    k.push_back(numeric_key<int>("max_reasoning_tokens", "upper bound on generated reasoning tokens",
                                 [](Config& c) -> auto& { return c.backend.max_reasoning_tokens; }));
    k.push_back({"index_path", "index file written by `index` and read by `search`",
                 [](Config& c, const std::string& v) { c.index_path = v; },
                 [](const Config& c) { return c.index_path; }});
    k.push_back(numeric_key<double>("tau", "soft-rank temperature", [](Config& c) -> auto& { return c.tau; }));
    k.push_back({"stage", "training stage (stage1 or stage2): query template and loss-weight preset",
                 [](Config& c, const std::string& v) {
                   c.stage = parse_stage(v);
                   require(c.stage != Stage::kStage3, Errc::kInvalidInput,
                           "config key 'stage': stage3 uses the stage2 template; pass stage2");
                   c.stage_weights = StageLossWeights::for_stage(c.stage);
                 },
                 [](const Config& c) { return std::string(stage_name(c.stage)); }});
    k.push_back(numeric_key<double>("w_sft", "SFT loss weight (overrides the stage preset)",
                                    [](Config& c) -> auto& { return c.stage_weights.sft; }));
    k.push_back(numeric_key<double>("w_nce", "InfoNCE loss weight (overrides the stage preset)",
                                    [](Config& c) -> auto& { return c.stage_weights.nce; }));
    k.push_back(numeric_key<double>("w_tri", "triplet loss weight (overrides the stage preset)",
                                    [](Config& c) -> auto& { return c.stage_weights.tri; }));
    k.push_back(numeric_key<double>("w_kl", "KL loss weight (overrides the stage preset)",
                                    [](Config& c) -> auto& { return c.stage_weights.kl; }));
    k.push_back(numeric_key<double>("nce_temperature", "InfoNCE temperature",
                                    [](Config& c) -> auto& { return c.nce_temperature; }));
    k.push_back(numeric_key<double>("triplet_margin", "triplet hinge margin",
                                    [](Config& c) -> auto& { return c.triplet_margin; }));
    k.push_back(numeric_key<std::uint64_t>("seed", "toy environment and rollout seed",
                                           [](Config& c) -> auto& { return c.grpo.seed; }));
    k.push_back(numeric_key<std::size_t>("tasks", "number of toy tasks", [](Config& c) -> auto& { return c.tasks; }));
    k.push_back(numeric_key<std::size_t>("group_size", "GRPO samples per query",
                                         [](Config& c) -> auto& { return c.grpo.group_size; }));
    k.push_back(numeric_key<std::size_t>("iterations", "GRPO iterations",
                                         [](Config& c) -> auto& { return c.grpo.iterations; }));
    k.push_back(numeric_key<double>("lr", "policy learning rate", [](Config& c) -> auto& { return c.grpo.learning_rate; }));
    k.push_back(numeric_key<double>("advantage_epsilon", "std guard in group advantages",
                                    [](Config& c) -> auto& { return c.grpo.advantage_epsilon; }));
    k.push_back(numeric_key<double>("policy_temperature", "toy policy softmax temperature",
                                    [](Config& c) -> auto& { return c.policy_temperature; }));
    k.push_back(numeric_key<std::size_t>("vocab_size", "toy vocabulary size",
                                         [](Config& c) -> auto& { return c.toy.vocab_size; }));
    k.push_back(numeric_key<std::size_t>("n_expansions", "candidate expansions per toy task",
                                         [](Config& c) -> auto& { return c.toy.n_expansions; }));
    k.push_back(numeric_key<std::size_t>("n_distractors", "distractor documents per toy task",
                                         [](Config& c) -> auto& { return c.toy.n_distractors; }));
    k.push_back(numeric_key<std::size_t>("toy_dim", "toy bag-of-tokens embedding dimension",
                                         [](Config& c) -> auto& { return c.toy.dim; }));
    k.push_back(numeric_key<std::size_t>("malformed_decoys", "toy decoys emitted without <emb_token>",
                                         [](Config& c) -> auto& { return c.toy.malformed_decoys; }));
    k.push_back(numeric_key<double>("penalty_invalid", "R_format for malformed outputs",
                                    [](Config& c) -> auto& { return c.format_policy.penalty_invalid; }));
    k.push_back(numeric_key<double>("penalty_valid", "R_format for well-formed outputs",
                                    [](Config& c) -> auto& { return c.format_policy.penalty_valid; }));
    k.push_back(numeric_key<bool>("gating", "malformed outputs replace R_rank entirely",
                                  [](Config& c) -> auto& { return c.format_policy.gating; }));
    return k;
  }();
  return keys;
}

inline const ConfigKey* find_config_key(std::string_view name) {
  for (const auto& k : config_keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

using ConfigValues = std::map<std::string, std::string>;

// `key = value` lines; '#' starts a comment. Unknown keys are rejected.
inline ConfigValues parse_config_text(std::istream& in, const std::string& source = "<config>") {
  ConfigValues values;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    require(eq != std::string_view::npos, Errc::kInvalidInput,
            source + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key(trim(body.substr(0, eq)));
    require(find_config_key(key) != nullptr, Errc::kInvalidInput,
            source + ":" + std::to_string(lineno) + ": unknown config key '" + key + "'");
    values[key] = std::string(trim(body.substr(eq + 1)));
  }
  return values;
}

inline ConfigValues load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::kIo, "cannot open config file '" + path.string() + "'");
  return parse_config_text(in, path.string());
}

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

inline ConfigValues environment_values(const EnvLookup& lookup = process_env) {
  ConfigValues values;
  for (const auto& k : config_keys()) {
    if (auto v = lookup(k.env_var())) values[k.name] = *v;
  }
  return values;
}

// Later sources win: pass environment, then file, then flags.
inline Config resolve_config(std::initializer_list<const ConfigValues*> sources) {
  ConfigValues merged;
  for (const auto* s : sources) {
    for (const auto& [key, value] : *s) {
      require(find_config_key(key) != nullptr, Errc::kInvalidInput, "unknown config key '" + key + "'");
      merged[key] = value;
    }
  }
  Config c;
  for (const auto& k : config_keys()) {
    if (auto it = merged.find(k.name); it != merged.end()) k.set(c, it->second);
  }
  c.validate();
  return c;
}

inline std::string dump_config(const Config& c) {
  std::ostringstream os;
  for (const auto& k : config_keys()) os << k.name << " = " << k.get(c) << '\n';
  return os.str();
}

}  // namespace t1
