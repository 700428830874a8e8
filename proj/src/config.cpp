#include "edge_grpo/config.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace edge_grpo {

using nlohmann::json;

namespace {

[[noreturn]] void bad_field(std::string_view field, std::string_view what) {
  throw std::invalid_argument("config field '" + std::string(field) + "': " + std::string(what));
}

int get_int(const json& j, std::string_view field) {
  if (!j.is_number_integer()) bad_field(field, "expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    bad_field(field, "integer out of range");
  }
  return static_cast<int>(v);
}

double get_double(const json& j, std::string_view field) {
  if (!j.is_number()) bad_field(field, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad_field(field, "must be finite");
  return v;
}

bool get_bool(const json& j, std::string_view field) {
  if (!j.is_boolean()) bad_field(field, "expected true or false");
  return j.get<bool>();
}

std::string get_string(const json& j, std::string_view field) {
  if (!j.is_string()) bad_field(field, "expected a string");
  return j.get<std::string>();
}

void reject_unknown(const json& j, const std::set<std::string>& known, std::string_view scope) {
  if (!j.is_object()) bad_field(scope, "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) {
      bad_field(scope.empty() ? key : std::string(scope) + "." + key, "unknown field");
    }
  }
}

TaskMix parse_mix(const json& j, std::string_view field) {
  if (!j.is_array() || j.empty()) bad_field(field, "expected a non-empty array of task specs");
  TaskMix mix;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string where = std::string(field) + "[" + std::to_string(i) + "]";
    const json& e = j[i];
    reject_unknown(e, {"chain_length", "modulus", "ops", "weight"}, where);
    TaskMix::Entry entry;
    if (e.contains("chain_length")) entry.spec.chain_length = get_int(e["chain_length"], where + ".chain_length");
    if (e.contains("modulus")) entry.spec.modulus = get_int(e["modulus"], where + ".modulus");
    if (e.contains("ops")) {
      if (!e["ops"].is_array()) bad_field(where + ".ops", "expected an array of op names");
      entry.spec.ops.clear();
      for (const auto& o : e["ops"]) {
        try {
          entry.spec.ops.push_back(op_from_name(get_string(o, where + ".ops")));
        } catch (const std::invalid_argument& ex) {
          bad_field(where + ".ops", ex.what());
        }
      }
    }
    if (e.contains("weight")) entry.weight = get_double(e["weight"], where + ".weight");
    try {
      entry.spec.validate();
    } catch (const std::invalid_argument& ex) {
      bad_field(where, ex.what());
    }
    mix.entries.push_back(std::move(entry));
  }
  try {
    mix.validate();
  } catch (const std::invalid_argument& ex) {
    bad_field(field, ex.what());
  }
  return mix;
}

json mix_to_json(const TaskMix& mix) {
  json arr = json::array();
  for (const auto& e : mix.entries) {
    json j = task_spec_to_json(e.spec);
    j["weight"] = e.weight;
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace

std::string_view mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::kVanilla: return "vanilla";
    case TrainMode::kForceR: return "force-r";
    case TrainMode::kForceREda: return "force-r-eda";
    case TrainMode::kEdge: return "edge";
  }
  throw std::invalid_argument("unknown mode");
}

TrainMode mode_from_name(std::string_view name) {
  if (name == "vanilla") return TrainMode::kVanilla;
  if (name == "force-r") return TrainMode::kForceR;
  if (name == "force-r-eda") return TrainMode::kForceREda;
  if (name == "edge") return TrainMode::kEdge;
  throw std::invalid_argument("unknown mode '" + std::string(name) +
                              "' (expected vanilla, force-r, force-r-eda or edge)");
}

bool uses_correction(TrainMode mode) { return mode != TrainMode::kVanilla; }

bool uses_eda(TrainMode mode) {
  return mode == TrainMode::kForceREda || mode == TrainMode::kEdge;
}

void TrainConfig::validate() const {
  if (group_size < 2) bad_field("group_size", "must be >= 2");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) bad_field("temperature", "must be > 0");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) bad_field("clip_eps", "must be in (0, 1)");
  if (!(lr >= 0.0) || !std::isfinite(lr)) bad_field("lr", "must be finite and >= 0");
  if (steps < 0) bad_field("steps", "must be >= 0");
  if (questions_per_step < 1) bad_field("questions_per_step", "must be >= 1");
  if (!(kl_beta >= 0.0) || !std::isfinite(kl_beta)) bad_field("kl_beta", "must be finite and >= 0");
  if (max_len < 1) bad_field("max_len", "must be >= 1");
  if (context_order < 1) bad_field("context_order", "must be >= 1");
  if (eval_every < 1) bad_field("eval_every", "must be >= 1");
  if (eval_questions < 1) bad_field("eval_questions", "must be >= 1");
  if (!(entropy_floor > 0.0)) bad_field("entropy_floor", "must be > 0");
  try {
    tasks.validate();
  } catch (const std::invalid_argument& e) {
    bad_field("tasks", e.what());
  }
  if (eval_tasks) {
    try {
      eval_tasks->validate();
    } catch (const std::invalid_argument& e) {
      bad_field("eval_tasks", e.what());
    }
    if (eval_tasks->modulus() != tasks.modulus()) bad_field("eval_tasks", "modulus differs from tasks");
  }
  try {
    gec.validate();
  } catch (const std::invalid_argument& e) {
    bad_field("gec", e.what());
  }
  const int vocab = Vocab(tasks.modulus()).size();
  for (TokenId t : gec.reflection_prompt_tokens) {
    if (t < 0 || t >= vocab) bad_field("gec.reflection_prompt_tokens", "token outside vocabulary");
  }
}

GecConfig TrainConfig::effective_gec() const {
  if (mode == TrainMode::kForceR || mode == TrainMode::kForceREda) {
    GecConfig g = gec;
    g.p_regenerate = 1.0;
    g.p_inject = 0.0;
    g.p_replace = 0.0;
    return g;
  }
  return gec;
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  reject_unknown(j,
                 {"group_size", "temperature", "clip_eps", "lr", "steps", "questions_per_step",
                  "mode", "kl_beta", "seed", "max_len", "context_order", "tasks", "eval_tasks",
                  "gec", "eval_every", "eval_questions", "format_bonus", "format_bonus_value",
                  "entropy_floor", "metrics_path", "record_wall_time"},
                 "");
  if (j.contains("group_size")) c.group_size = get_int(j["group_size"], "group_size");
  if (j.contains("temperature")) c.temperature = get_double(j["temperature"], "temperature");
  if (j.contains("clip_eps")) c.clip_eps = get_double(j["clip_eps"], "clip_eps");
  if (j.contains("lr")) c.lr = get_double(j["lr"], "lr");
  if (j.contains("steps")) c.steps = get_int(j["steps"], "steps");
  if (j.contains("questions_per_step")) {
    c.questions_per_step = get_int(j["questions_per_step"], "questions_per_step");
  }
  if (j.contains("mode")) {
    try {
      c.mode = mode_from_name(get_string(j["mode"], "mode"));
    } catch (const std::invalid_argument& e) {
      bad_field("mode", e.what());
    }
  }
  if (j.contains("kl_beta")) c.kl_beta = get_double(j["kl_beta"], "kl_beta");
  if (j.contains("seed")) {
    const json& s = j["seed"];
    if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<std::int64_t>() < 0)) {
      bad_field("seed", "expected a nonnegative integer");
    }
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("max_len")) c.max_len = get_int(j["max_len"], "max_len");
  if (j.contains("context_order")) c.context_order = get_int(j["context_order"], "context_order");
  if (j.contains("tasks")) c.tasks = parse_mix(j["tasks"], "tasks");
  if (j.contains("eval_tasks")) {
    if (j["eval_tasks"].is_null()) {
      c.eval_tasks.reset();
    } else {
      c.eval_tasks = parse_mix(j["eval_tasks"], "eval_tasks");
    }
  }
  if (j.contains("gec")) {
    const json& g = j["gec"];
    reject_unknown(g,
                   {"p_regenerate", "p_inject", "p_replace", "reflection_prompt_id",
                    "reflection_prompt_tokens"},
                   "gec");
    if (g.contains("p_regenerate")) c.gec.p_regenerate = get_double(g["p_regenerate"], "gec.p_regenerate");
    if (g.contains("p_inject")) c.gec.p_inject = get_double(g["p_inject"], "gec.p_inject");
    if (g.contains("p_replace")) c.gec.p_replace = get_double(g["p_replace"], "gec.p_replace");
    if (g.contains("reflection_prompt_id")) {
      const int id = get_int(g["reflection_prompt_id"], "gec.reflection_prompt_id");
      if (id < 0 || id >= kNumReflectionPrompts) bad_field("gec.reflection_prompt_id", "must be 0..3");
      c.gec.reflection_prompt_tokens = reflection_prompt(id);
    }
    if (g.contains("reflection_prompt_tokens")) {
      const json& t = g["reflection_prompt_tokens"];
      if (!t.is_array()) bad_field("gec.reflection_prompt_tokens", "expected an array of token ids");
      c.gec.reflection_prompt_tokens.clear();
      for (const auto& x : t) {
        c.gec.reflection_prompt_tokens.push_back(get_int(x, "gec.reflection_prompt_tokens"));
      }
    }
  }
  if (j.contains("eval_every")) c.eval_every = get_int(j["eval_every"], "eval_every");
  if (j.contains("eval_questions")) c.eval_questions = get_int(j["eval_questions"], "eval_questions");
  if (j.contains("format_bonus")) c.reward.format_bonus = get_bool(j["format_bonus"], "format_bonus");
  if (j.contains("format_bonus_value")) {
    c.reward.format_bonus_value = get_double(j["format_bonus_value"], "format_bonus_value");
  }
  if (j.contains("entropy_floor")) c.entropy_floor = get_double(j["entropy_floor"], "entropy_floor");
  if (j.contains("metrics_path")) c.metrics_path = get_string(j["metrics_path"], "metrics_path");
  if (j.contains("record_wall_time")) {
    c.record_wall_time = get_bool(j["record_wall_time"], "record_wall_time");
  }
  c.validate();
  return c;
}

json train_config_to_json(const TrainConfig& c) {
  json j{{"group_size", c.group_size},
         {"temperature", c.temperature},
         {"clip_eps", c.clip_eps},
         {"lr", c.lr},
         {"steps", c.steps},
         {"questions_per_step", c.questions_per_step},
         {"mode", mode_name(c.mode)},
         {"kl_beta", c.kl_beta},
         {"seed", c.seed},
         {"max_len", c.max_len},
         {"context_order", c.context_order},
         {"tasks", mix_to_json(c.tasks)},
         {"eval_tasks", c.eval_tasks ? mix_to_json(*c.eval_tasks) : json(nullptr)},
         {"gec",
          {{"p_regenerate", c.gec.p_regenerate},
           {"p_inject", c.gec.p_inject},
           {"p_replace", c.gec.p_replace},
           {"reflection_prompt_tokens", c.gec.reflection_prompt_tokens}}},
         {"eval_every", c.eval_every},
         {"eval_questions", c.eval_questions},
         {"format_bonus", c.reward.format_bonus},
         {"format_bonus_value", c.reward.format_bonus_value},
         {"entropy_floor", c.entropy_floor},
         {"metrics_path", c.metrics_path},
         {"record_wall_time", c.record_wall_time}};
  return j;
}

}  // namespace edge_grpo
