#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRAM Authors

// Command-line front end. Every command is a function of its flags; the only
// non-deterministic output is the wall_clock_seconds report field.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 data/checkpoint error.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "mram/checkpoint.hpp"
#include "mram/config.hpp"
#include "mram/data.hpp"
#include "mram/error.hpp"
#include "mram/parallel.hpp"
#include "mram/trainer.hpp"

namespace mram::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;

using Json = nlohmann::ordered_json;

/// Serializes JSON with every floating-point number printed as %.6f.
inline void write_json(std::ostream& os, const Json& j, int indent = 2, int level = 0) {
  const std::string pad(static_cast<std::size_t>(indent * (level + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(indent * level), ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      bool first = true;
      for (const auto& [key, value] : j.items()) {
        if (!first) os << ",\n";
        first = false;
        os << pad << Json(key).dump() << ": ";
        write_json(os, value, indent, level + 1);
      }
      os << "\n" << close_pad << "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      const bool nested = std::any_of(j.begin(), j.end(), [](const Json& v) { return v.is_structured(); });
      os << (nested ? "[\n" : "[");
      bool first = true;
      for (const auto& value : j) {
        if (!first) os << (nested ? ",\n" : ", ");
        first = false;
        if (nested) os << pad;
        write_json(os, value, indent, level + 1);
      }
      if (nested) os << "\n" << close_pad;
      os << "]";
      return;
    }
    case Json::value_t::number_float: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6f", j.get<double>());
      os << buf;
      return;
    }
    default:
      os << j.dump();
  }
}

inline std::string to_json_text(const Json& j) {
  std::ostringstream os;
  write_json(os, j);
  os << "\n";
  return os.str();
}

inline std::string sha256_hex(const std::vector<char>& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &length) != 1)
    throw Error("SHA-256 computation failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < length; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

inline std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline Json metrics_json(const MetricSummary& m) {
  return Json{{"miou", m.miou}, {"mf1", m.mf1}, {"mpre", m.mpre}, {"mrec", m.mrec}};
}

inline Json evaluation_json(const Evaluation& ev) {
  Json j;
  j["metrics"] = metrics_json(ev.metrics);
  Json per_class = Json::array();
  for (const auto& c : ev.metrics.per_class)
    per_class.push_back(
        {{"class", c.cls}, {"iou", c.iou}, {"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}});
  j["per_class"] = per_class;
  j["mean_ce"] = ev.mean_ce;
  if (ev.purity) {
    Json per = Json::object();
    Json modal = Json::object();
    for (const auto& [s, v] : ev.purity->per_scenario) per[std::to_string(s)] = v;
    for (const auto& [s, e] : ev.purity->modal_expert) modal[std::to_string(s)] = e;
    j["routing_purity"] = {{"per_scenario", per}, {"modal_expert", modal}, {"macro", ev.purity->macro}};
  } else {
    j["routing_purity"] = nullptr;
  }
  j["selection_histogram"] = ev.selection_counts;
  return j;
}

/// Train flags shared by `train` and `compare`.
struct TrainFlags {
  TrainConfig config;
  std::string router = "moe-rm";
  std::string frl_update = "batch";
};

inline void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  auto& c = f.config;
  cmd->add_option("--experts", c.n_experts, "Number of experts")->capture_default_str();
  cmd->add_option("--top-k", c.top_k, "Experts routed per sample")->capture_default_str();
  cmd->add_option("--prototypes", c.prototypes_per_expert, "Prototypes per feature retrieval library")
      ->capture_default_str();
  cmd->add_option("--hidden", c.hidden_dim, "Expert hidden width")->capture_default_str();
  cmd->add_option("--eta", c.eta, "Library update rate in [0, 1]")->capture_default_str();
  cmd->add_option("--tau", c.tau, "Routing temperature")->capture_default_str();
  cmd->add_option("--epsilon", c.epsilon, "Divergence stabilizer")->capture_default_str();
  cmd->add_option("--lambda-lb", c.lambda_lb, "Load-balance loss weight")->capture_default_str();
  cmd->add_option("--lambda-frl", c.lambda_frl, "Library regularizer weight")->capture_default_str();
  cmd->add_option("--lr", c.learning_rate, "Adam learning rate")->capture_default_str();
  cmd->add_option("--weight-decay", c.weight_decay, "Decoupled weight decay")->capture_default_str();
  cmd->add_option("--batch", c.batch_size, "Mini-batch size")->capture_default_str();
  cmd->add_option("--steps", c.steps, "Training steps")->capture_default_str();
  cmd->add_option("--router", f.router, "Router kind")
      ->check(CLI::IsMember({"moe-rm", "linear", "soft"}))
      ->capture_default_str();
  cmd->add_option("--frl-update", f.frl_update, "Library update schedule")
      ->check(CLI::IsMember({"batch", "sequential"}))
      ->capture_default_str();
  cmd->add_flag("--full-beta-grad", c.full_beta_gradient, "Differentiate through aggregation weights");
  cmd->add_flag("--frl-shrinkage", c.frl_shrinkage, "Decay prototypes by (1 - lr * lambda_frl) each step");
  cmd->add_flag("--identity-projection", c.identity_projection, "Use identity prototype projection");
}

/// Fills data-derived fields and validates.
inline TrainConfig resolve(const TrainFlags& f, const Dataset& data) {
  TrainConfig c = f.config;
  c.router = parse_router_kind(f.router);
  c.frl_update = f.frl_update == "sequential" ? FrlUpdateMode::per_sample : FrlUpdateMode::batch_aggregated;
  c.feature_dim = data.dim;
  c.pixels = data.pixels;
  c.classes = data.classes;
  c.threads = threads_from_env();
  c.validate();
  return c;
}

inline std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  io::write_file(path, std::vector<char>(text.begin(), text.end()));
}

// ---------------------------------------------------------------------------

struct GenDataArgs {
  ScenarioDesign design;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> sample_seed;
  std::string out;
};

inline int cmd_gen_data(const GenDataArgs& a, std::ostream& out) {
  detail::require_config(a.design.scenarios >= 1, "--scenarios must be >= 1");
  detail::require_config(a.design.per_scenario >= 1, "--per-scenario must be >= 1");
  const auto specs = make_scenario_specs(a.design, a.seed);
  const Dataset ds = generate_synthetic(specs, a.sample_seed.value_or(a.seed));
  const auto bytes = encode_dataset(ds);
  io::write_file(a.out, bytes);
  out << "wrote " << ds.size() << " samples (d=" << ds.dim << ", pixels=" << ds.pixels << ", classes=" << ds.classes
      << ") to " << a.out << "\n";
  out << "sha256 " << sha256_hex(bytes) << "\n";
  return kExitOk;
}

struct TrainArgs {
  TrainFlags flags;
  std::string data;
  std::string out_dir;
};

inline constexpr const char* kCheckpointFile = "checkpoint.mram";
inline constexpr const char* kLogFile = "train_log.csv";
inline constexpr const char* kReportFile = "report.json";

inline std::string log_header(std::size_t experts) {
  std::string h = "step,ce,lb,frl,total,routing_entropy";
  for (std::size_t j = 0; j < experts; ++j) h += ",sel_" + std::to_string(j);
  return h + "\n";
}

inline std::string log_row(const StepRecord& r) {
  std::string row = std::to_string(r.step) + "," + fixed6(r.loss.ce) + "," + fixed6(r.loss.lb) + "," +
                    fixed6(r.loss.frl) + "," + fixed6(r.loss.total) + "," + fixed6(r.metrics.routing_entropy);
  for (auto c : r.metrics.selection_counts) row += "," + std::to_string(c);
  return row + "\n";
}

inline int cmd_train(const TrainArgs& a, std::ostream& out) {
  const Dataset data = load_dataset(a.data);
  const TrainConfig config = resolve(a.flags, data);
  detail::require_input(!data.empty(), "dataset '" + a.data + "' has no samples");

  const auto started = std::chrono::steady_clock::now();
  std::filesystem::create_directories(a.out_dir);
  const std::filesystem::path dir(a.out_dir);

  std::string log = log_header(config.n_experts);
  const TrainResult result = train(data, config, [&](const StepRecord& r) { log += log_row(r); });
  const Evaluation ev = evaluate(result.state, config, data);

  save_checkpoint((dir / kCheckpointFile).string(), config, result.state);
  write_text((dir / kLogFile).string(), log);

  Json report;
  report["command"] = "train";
  report["router"] = std::string(to_string(config.router));
  report["config"] = to_json(config);
  report["dataset"] = {{"path", a.data}, {"samples", data.size()}, {"feature_dim", data.dim},
                       {"pixels", data.pixels}, {"classes", data.classes}};
  report["steps"] = result.history.size();
  if (!result.history.empty()) {
    const auto& last = result.history.back().loss;
    report["final_loss"] = {{"ce", last.ce}, {"lb", last.lb}, {"frl", last.frl}, {"total", last.total}};
  } else {
    report["final_loss"] = nullptr;
  }
  const Json evaluation = evaluation_json(ev);
  for (const auto& [k, v] : evaluation.items()) report[k] = v;
  report["log"] = kLogFile;
  report["checkpoint"] = kCheckpointFile;
  report["wall_clock_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_text((dir / kReportFile).string(), to_json_text(report));

  out << "trained " << config.steps << " steps, router " << to_string(config.router) << ": miou "
      << fixed6(ev.metrics.miou) << ", mf1 " << fixed6(ev.metrics.mf1) << "\n";
  out << "wrote " << (dir / kCheckpointFile).string() << ", " << (dir / kLogFile).string() << ", "
      << (dir / kReportFile).string() << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
};

inline int cmd_eval(const EvalArgs& a, std::ostream& out) {
  Checkpoint ck = load_checkpoint(a.checkpoint);
  const Dataset data = load_dataset(a.data);
  ck.config.threads = threads_from_env();
  const Evaluation ev = evaluate(ck.state, ck.config, data);

  Json report;
  report["command"] = "eval";
  report["router"] = std::string(to_string(ck.config.router));
  report["samples"] = data.size();
  const Json evaluation = evaluation_json(ev);
  for (const auto& [k, v] : evaluation.items()) report[k] = v;
  const std::string text = to_json_text(report);
  if (a.out.empty())
    out << text;
  else
    write_text(a.out, text);
  return kExitOk;
}

struct CompareArgs {
  TrainFlags flags;
  std::string routers = "moe-rm,linear,soft";
  std::string seeds = "1,2,3";
  std::string data;
  std::string test_data;
  std::string out;
};

inline int cmd_compare(const CompareArgs& a, std::ostream& out) {
  const Dataset data = load_dataset(a.data);
  const Dataset test = a.test_data.empty() ? data : load_dataset(a.test_data);
  const auto routers = split_csv(a.routers);
  const auto seed_strings = split_csv(a.seeds);
  detail::require_config(!routers.empty() && !seed_strings.empty(), "--routers and --seeds must be non-empty");
  std::vector<std::uint64_t> seeds;
  for (const auto& s : seed_strings) {
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(s, &used));
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw ConfigError("invalid seed '" + s + "'");
    }
  }
  std::vector<TrainConfig> configs;
  for (const auto& r : routers) {
    TrainFlags f = a.flags;
    f.router = r;
    for (auto seed : seeds) {
      f.config.seed = seed;
      configs.push_back(resolve(f, data));
    }
  }

  std::string csv = "router,seed,miou,mf1,mpre,mrec\n";
  for (const auto& c : configs) {
    const TrainResult result = train(data, c);
    const Evaluation ev = evaluate(result.state, c, test);
    csv += std::string(to_string(c.router)) + "," + std::to_string(c.seed) + "," + fixed6(ev.metrics.miou) + "," +
           fixed6(ev.metrics.mf1) + "," + fixed6(ev.metrics.mpre) + "," + fixed6(ev.metrics.mrec) + "\n";
  }
  if (a.out.empty())
    out << csv;
  else
    write_text(a.out, csv);
  return kExitOk;
}

struct InspectArgs {
  std::string checkpoint;
  std::string out;
  std::string with_features;
  std::string features_out = "frl_features.txt";
};

/// One row per prototype: expert, prototype, importance, then d coordinates.
inline std::string frl_dump(const TrainState& state) {
  std::string text;
  for (std::size_t j = 0; j < state.libraries.size(); ++j) {
    const auto& lib = state.libraries[j];
    for (std::size_t k = 0; k < lib.size(); ++k) {
      text += std::to_string(j) + "," + std::to_string(k) + "," + fixed6(lib[k].importance);
      for (double v : lib[k].prototype) text += "," + fixed6(v);
      text += "\n";
    }
  }
  return text;
}

/// One row per sample: index, scenario id (-1 when absent), then d coordinates.
inline std::string feature_dump(const Dataset& data) {
  std::string text;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data.samples[i];
    text += std::to_string(i) + "," + (s.scenario_id ? std::to_string(*s.scenario_id) : std::string("-1"));
    for (float v : s.feature) text += "," + fixed6(v);
    text += "\n";
  }
  return text;
}

inline int cmd_inspect_frl(const InspectArgs& a, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const std::string dump = frl_dump(ck.state);
  if (a.out.empty())
    out << dump;
  else
    write_text(a.out, dump);
  if (!a.with_features.empty()) {
    const Dataset data = load_dataset(a.with_features);
    check_dataset(data, ck.config);
    write_text(a.features_out, feature_dump(data));
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

/// Parses `args` (args[0] is the program name) and runs the chosen command.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Statistic-augmented mixture-of-experts engine", "mram"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic scenario dataset (MRDS)");
  gen_cmd->add_option("--scenarios", gen.design.scenarios, "Number of scenarios")->capture_default_str();
  gen_cmd->add_option("--per-scenario", gen.design.per_scenario, "Samples per scenario")->capture_default_str();
  gen_cmd->add_option("--dim", gen.design.dim, "Feature dimension")->capture_default_str();
  gen_cmd->add_option("--pixels", gen.design.pixels, "Label pixels per sample")->capture_default_str();
  gen_cmd->add_option("--classes", gen.design.classes, "Class count")->capture_default_str();
  gen_cmd->add_option("--noise", gen.design.noise, "Feature noise std")->capture_default_str();
  gen_cmd->add_option("--separation", gen.design.separation, "Minimum mean distance in noise units")
      ->capture_default_str();
  gen_cmd->add_option("--label-scale", gen.design.label_scale, "Std of the within-scenario label rule")
      ->capture_default_str();
  gen_cmd->add_option("--scenario-logit-scale", gen.design.scenario_logit_scale,
                      "Std of the per-scenario logit offset")
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Seed for scenario design (and samples)")->capture_default_str();
  gen_cmd->add_option("--sample-seed", gen.sample_seed, "Seed for samples only (defaults to --seed)");
  gen_cmd->add_option("--out", gen.out, "Output MRDS path")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model on an MRDS dataset");
  add_train_flags(train_cmd, tr.flags);
  train_cmd->add_option("--seed", tr.flags.config.seed, "Root seed")->capture_default_str();
  train_cmd->add_option("--data", tr.data, "Training MRDS file")->required();
  train_cmd->add_option("--out-dir", tr.out_dir, "Directory for checkpoint, log and report")->required();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on an MRDS dataset");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--data", ev.data, "MRDS file")->required();
  eval_cmd->add_option("--out", ev.out, "Output JSON path (stdout when omitted)");

  CompareArgs cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "Train every router kind on every seed and tabulate metrics");
  add_train_flags(cmp_cmd, cmp.flags);
  cmp_cmd->add_option("--routers", cmp.routers, "Comma-separated router kinds")->capture_default_str();
  cmp_cmd->add_option("--seeds", cmp.seeds, "Comma-separated seeds")->capture_default_str();
  cmp_cmd->add_option("--data", cmp.data, "Training MRDS file")->required();
  cmp_cmd->add_option("--test-data", cmp.test_data, "Evaluation MRDS file (training data when omitted)");
  cmp_cmd->add_option("--out", cmp.out, "Output CSV path (stdout when omitted)");

  InspectArgs ins;
  auto* ins_cmd = app.add_subcommand("inspect-frl", "Dump feature retrieval library prototypes");
  ins_cmd->add_option("--checkpoint", ins.checkpoint, "Checkpoint file")->required();
  ins_cmd->add_option("--out", ins.out, "Output path (stdout when omitted)");
  ins_cmd->add_option("--with-features", ins.with_features, "Also dump the features of this MRDS file");
  ins_cmd->add_option("--features-out", ins.features_out, "Where to write the feature table")->capture_default_str();

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_data(gen, out);
    if (train_cmd->parsed()) return cmd_train(tr, out);
    if (eval_cmd->parsed()) return cmd_eval(ev, out);
    if (cmp_cmd->parsed()) return cmd_compare(cmp, out);
    if (ins_cmd->parsed()) return cmd_inspect_frl(ins, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace mram::cli
