#include "dpiqn/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace dpiqn {

using nlohmann::json;

const char* to_string(HeadSelection h) {
  switch (h) {
    case HeadSelection::None: return "none";
    case HeadSelection::Both: return "both";
    case HeadSelection::OpponentsOnly: return "o_only";
    case HeadSelection::CollaboratorOnly: return "c_only";
  }
  return "?";
}

bool head_selection_from_string(const std::string& s, HeadSelection* out) {
  if (s == "none") *out = HeadSelection::None;
  else if (s == "both") *out = HeadSelection::Both;
  else if (s == "o_only") *out = HeadSelection::OpponentsOnly;
  else if (s == "c_only") *out = HeadSelection::CollaboratorOnly;
  else return false;
  return true;
}

const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::DQN: return "dqn";
    case ModelKind::DRQN: return "drqn";
    case ModelKind::DPIQN: return "dpiqn";
    case ModelKind::DRPIQN: return "drpiqn";
    case ModelKind::FPDQN: return "fpdqn";
  }
  return "?";
}

bool model_kind_from_string(const std::string& s, ModelKind* out) {
  if (s == "dqn") *out = ModelKind::DQN;
  else if (s == "drqn") *out = ModelKind::DRQN;
  else if (s == "dpiqn") *out = ModelKind::DPIQN;
  else if (s == "drpiqn") *out = ModelKind::DRPIQN;
  else if (s == "fpdqn") *out = ModelKind::FPDQN;
  else return false;
  return true;
}

namespace {

[[noreturn]] void bad_config(const std::string& msg) {
  throw ContractError("config error: " + msg);
}

// Rejects unknown keys so hyperparameter typos cannot pass silently.
void check_keys(const json& obj, const std::set<std::string>& known, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!known.count(it.key()))
      bad_config("unknown key \"" + it.key() + "\" in " + where);
}

template <typename T>
void read(const json& obj, const char* key, T* out) {
  if (obj.contains(key)) *out = obj.at(key).get<T>();
}

void read_schedule_kind(const json& obj, const char* key, ScheduleKind* out,
                        const std::string& where) {
  if (!obj.contains(key)) return;
  const std::string s = obj.at(key).get<std::string>();
  if (!schedule_kind_from_string(s, out))
    bad_config("invalid mode \"" + s + "\" for " + where + "." + key);
}

ModelConfig parse_model(const json& obj, const std::string& where) {
  check_keys(obj, {"kind", "heads", "conv", "embed_dim", "branch_dim", "lstm_hidden"}, where);
  ModelConfig m;
  if (obj.contains("kind")) {
    const std::string s = obj.at("kind").get<std::string>();
    if (!model_kind_from_string(s, &m.kind)) bad_config("unknown model kind \"" + s + "\"");
  }
  // default head selection follows the kind
  m.heads = (m.kind == ModelKind::DPIQN || m.kind == ModelKind::DRPIQN) ? HeadSelection::Both
                                                                        : HeadSelection::None;
  if (obj.contains("heads")) {
    const std::string s = obj.at("heads").get<std::string>();
    if (!head_selection_from_string(s, &m.heads)) bad_config("unknown head selection \"" + s + "\"");
  }
  if (obj.contains("conv")) {
    m.convs.clear();
    for (const auto& row : obj.at("conv")) {
      if (!row.is_array() || row.size() != 3)
        bad_config(where + ".conv entries must be [filters, kernel, stride]");
      m.convs.push_back({row[0].get<int>(), row[1].get<int>(), row[2].get<int>()});
    }
  }
  read(obj, "embed_dim", &m.embed_dim);
  read(obj, "branch_dim", &m.branch_dim);
  read(obj, "lstm_hidden", &m.lstm_hidden);
  return m;
}

json model_to_json(const ModelConfig& m) {
  json o;
  o["kind"] = to_string(m.kind);
  o["heads"] = to_string(m.heads);
  json conv = json::array();
  for (const auto& c : m.convs) conv.push_back({c.filters, c.kernel, c.stride});
  o["conv"] = conv;
  o["embed_dim"] = m.embed_dim;
  o["branch_dim"] = m.branch_dim;
  o["lstm_hidden"] = m.lstm_hidden;
  return o;
}

}  // namespace

std::vector<int> ExperimentConfig::modeled_agents(int slot) const {
  const ModelConfig& mc = slot == 0 ? model : *learner_b;
  const int per_team = scenario == Scenario::OneVsOne ? 1 : 2;
  const int me = slot;  // learners are left-team indices 0..n_learners-1

  std::vector<int> out;
  if (mc.heads == HeadSelection::None) return out;

  const bool want_collab =
      mc.heads == HeadSelection::Both || mc.heads == HeadSelection::CollaboratorOnly;
  const bool want_opp =
      mc.heads == HeadSelection::Both || mc.heads == HeadSelection::OpponentsOnly;

  if (want_collab) {
    if (per_team < 2 && mc.heads == HeadSelection::CollaboratorOnly)
      bad_config("head selection \"c_only\" needs a collaborator, but " +
                 std::string(to_string(scenario)) + " has none");
    for (int i = 0; i < per_team; ++i)
      if (i != me) out.push_back(i);
  }
  if (want_opp)
    for (int i = 0; i < per_team; ++i) out.push_back(per_team + i);
  return out;
}

ModelSpec ExperimentConfig::model_spec(int slot) const {
  const ModelConfig& mc = slot == 0 ? model : *learner_b;
  ModelSpec spec;
  spec.kind = mc.kind;
  spec.n_heads = static_cast<int>(modeled_agents(slot).size());
  spec.history = spec.recurrent() ? 1 : train.history;
  spec.convs = mc.convs;
  spec.embed_dim = mc.embed_dim;
  spec.branch_dim = mc.branch_dim;
  spec.lstm_hidden = mc.lstm_hidden;
  spec.validate();
  return spec;
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const std::exception& e) {
    bad_config(std::string("not valid JSON: ") + e.what());
  }
  check_keys(root, {"seed", "out_dir", "threads", "scenario", "model", "learner_b", "train",
                    "eval"},
             "the top level");

  ExperimentConfig cfg;
  read(root, "seed", &cfg.seed);
  read(root, "out_dir", &cfg.out_dir);
  read(root, "threads", &cfg.threads);
  if (root.contains("scenario")) {
    const std::string s = root.at("scenario").get<std::string>();
    if (!scenario_from_string(s, &cfg.scenario)) bad_config("unknown scenario \"" + s + "\"");
  }
  if (root.contains("model")) cfg.model = parse_model(root.at("model"), "model");
  else cfg.model = parse_model(json::object(), "model");
  if (root.contains("learner_b")) cfg.learner_b = parse_model(root.at("learner_b"), "learner_b");

  if (root.contains("train")) {
    const json& t = root.at("train");
    check_keys(t,
               {"total_timesteps", "epoch_len", "train_every", "lr", "lr_drops", "epsilon_start",
                "epsilon_final", "epsilon_anneal_epochs", "gamma", "target_sync",
                "target_sync_unit", "replay_capacity", "batch", "history", "seq_len", "warmup",
                "checkpoint_every_epochs", "lambda_mode", "opponent_mode", "collaborator_mode"},
               "section \"train\"");
    auto& tr = cfg.train;
    read(t, "total_timesteps", &tr.total_timesteps);
    read(t, "epoch_len", &tr.epoch_len);
    read(t, "train_every", &tr.train_every);
    read(t, "lr", &tr.lr);
    if (t.contains("lr_drops")) {
      tr.lr_drops.clear();
      for (const auto& row : t.at("lr_drops")) {
        if (!row.is_array() || row.size() != 2) bad_config("lr_drops entries must be [epoch, lr]");
        tr.lr_drops.emplace_back(row[0].get<int>(), row[1].get<double>());
      }
    }
    read(t, "epsilon_start", &tr.epsilon_start);
    read(t, "epsilon_final", &tr.epsilon_final);
    read(t, "epsilon_anneal_epochs", &tr.epsilon_anneal_epochs);
    read(t, "gamma", &tr.gamma);
    read(t, "target_sync", &tr.target_sync);
    read(t, "target_sync_unit", &tr.target_sync_unit);
    if (tr.target_sync_unit != "updates" && tr.target_sync_unit != "env_steps")
      bad_config("target_sync_unit must be \"updates\" or \"env_steps\"");
    read(t, "replay_capacity", &tr.replay_capacity);
    read(t, "batch", &tr.batch);
    read(t, "history", &tr.history);
    read(t, "seq_len", &tr.seq_len);
    read(t, "warmup", &tr.warmup);
    read(t, "checkpoint_every_epochs", &tr.checkpoint_every_epochs);
    read(t, "lambda_mode", &tr.lambda_mode);
    if (tr.lambda_mode != "adaptive" && tr.lambda_mode != "fixed1")
      bad_config("lambda_mode must be \"adaptive\" or \"fixed1\"");
    read_schedule_kind(t, "opponent_mode", &tr.opponent_mode, "train");
    read_schedule_kind(t, "collaborator_mode", &tr.collaborator_mode, "train");
  }

  if (root.contains("eval")) {
    const json& e = root.at("eval");
    check_keys(e, {"episodes", "opponent_mode", "collaborator_mode"}, "section \"eval\"");
    read(e, "episodes", &cfg.eval.episodes);
    read_schedule_kind(e, "opponent_mode", &cfg.eval.opponent_mode, "eval");
    read_schedule_kind(e, "collaborator_mode", &cfg.eval.collaborator_mode, "eval");
  }

  // cross-field validation
  for (int slot = 0; slot < cfg.n_learners(); ++slot) cfg.model_spec(slot);
  if (cfg.learner_b && cfg.scenario == Scenario::OneVsOne)
    bad_config("co-training needs a 2 vs 2 scenario");
  DPIQN_CHECK(cfg.train.epoch_len % cfg.train.train_every == 0,
              "epoch_len must be a multiple of train_every");
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  return from_json_text(read_text_file(path));
}

std::string ExperimentConfig::to_json() const {
  json root;
  root["seed"] = seed;
  root["out_dir"] = out_dir;
  root["threads"] = threads;
  root["scenario"] = to_string(scenario);
  root["model"] = model_to_json(model);
  if (learner_b) root["learner_b"] = model_to_json(*learner_b);

  json t;
  t["total_timesteps"] = train.total_timesteps;
  t["epoch_len"] = train.epoch_len;
  t["train_every"] = train.train_every;
  t["lr"] = train.lr;
  json drops = json::array();
  for (const auto& d : train.lr_drops) drops.push_back({d.first, d.second});
  t["lr_drops"] = drops;
  t["epsilon_start"] = train.epsilon_start;
  t["epsilon_final"] = train.epsilon_final;
  t["epsilon_anneal_epochs"] = train.epsilon_anneal_epochs;
  t["gamma"] = train.gamma;
  t["target_sync"] = train.target_sync;
  t["target_sync_unit"] = train.target_sync_unit;
  t["replay_capacity"] = train.replay_capacity;
  t["batch"] = train.batch;
  t["history"] = train.history;
  t["seq_len"] = train.seq_len;
  t["warmup"] = train.warmup;
  t["checkpoint_every_epochs"] = train.checkpoint_every_epochs;
  t["lambda_mode"] = train.lambda_mode;
  t["opponent_mode"] = to_string(train.opponent_mode);
  t["collaborator_mode"] = to_string(train.collaborator_mode);
  root["train"] = t;

  json e;
  e["episodes"] = eval.episodes;
  e["opponent_mode"] = to_string(eval.opponent_mode);
  e["collaborator_mode"] = to_string(eval.collaborator_mode);
  root["eval"] = e;
  return root.dump(2);
}

uint64_t ExperimentConfig::config_hash() const {
  const std::string text = to_json();
  return fnv1a64(text.data(), text.size());
}

std::string model_spec_to_json(const ModelSpec& spec) {
  json o;
  o["kind"] = to_string(spec.kind);
  o["n_heads"] = spec.n_heads;
  o["action_dim"] = spec.action_dim;
  o["target_action_dim"] = spec.target_action_dim;
  o["input_h"] = spec.input_h;
  o["input_w"] = spec.input_w;
  o["history"] = spec.history;
  json conv = json::array();
  for (const auto& c : spec.convs) conv.push_back({c.filters, c.kernel, c.stride});
  o["conv"] = conv;
  o["embed_dim"] = spec.embed_dim;
  o["branch_dim"] = spec.branch_dim;
  o["lstm_hidden"] = spec.lstm_hidden;
  return o.dump();
}

ModelSpec model_spec_from_json(const std::string& text) {
  json o = json::parse(text);
  ModelSpec spec;
  const std::string kind = o.at("kind").get<std::string>();
  DPIQN_CHECK(model_kind_from_string(kind, &spec.kind), "unknown model kind ", kind);
  spec.n_heads = o.at("n_heads").get<int>();
  spec.action_dim = o.at("action_dim").get<int>();
  spec.target_action_dim = o.at("target_action_dim").get<int>();
  spec.input_h = o.at("input_h").get<int>();
  spec.input_w = o.at("input_w").get<int>();
  spec.history = o.at("history").get<int>();
  spec.convs.clear();
  for (const auto& row : o.at("conv"))
    spec.convs.push_back({row[0].get<int>(), row[1].get<int>(), row[2].get<int>()});
  spec.embed_dim = o.at("embed_dim").get<int>();
  spec.branch_dim = o.at("branch_dim").get<int>();
  spec.lstm_hidden = o.at("lstm_hidden").get<int>();
  spec.validate();
  return spec;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  DPIQN_CHECK(f.good(), "cannot open ", path, " for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  DPIQN_CHECK(f.good(), "write to ", path, " failed");
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  DPIQN_CHECK(f.good(), "cannot open ", path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

}  // namespace dpiqn
