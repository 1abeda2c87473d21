// Command-line entry point. Errors go to stderr as one JSON object and make
// the process exit nonzero.

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "causelens/causelens.hpp"

namespace {

using causelens::Error;
using causelens::ErrorCode;

struct Flags {
  std::string config;
  std::string lexicon;
  std::string traces;
  std::string out;
  std::string languages;
  std::string orders;
  std::string conditions;
  std::string anchor;
  double variance_keep = 0.0;
  bool correct_only = false;
  bool export_ratios = false;
  int jobs = 0;
  std::string model_id;
};

struct Options {
  CLI::Option* lexicon = nullptr;
  CLI::Option* traces = nullptr;
  CLI::Option* out = nullptr;
  CLI::Option* languages = nullptr;
  CLI::Option* orders = nullptr;
  CLI::Option* conditions = nullptr;
  CLI::Option* anchor = nullptr;
  CLI::Option* variance_keep = nullptr;
  CLI::Option* correct_only = nullptr;
  CLI::Option* export_ratios = nullptr;
  CLI::Option* jobs = nullptr;
  CLI::Option* model_id = nullptr;
};

Options add_common(CLI::App* app, Flags& f) {
  Options o;
  app->add_option("--config", f.config, "TOML config file; flags override its values");
  o.lexicon = app->add_option("--lexicon", f.lexicon, "lexicon JSON");
  o.traces = app->add_option("--traces", f.traces, "trace bundle root");
  o.out = app->add_option("--out", f.out, "output directory (fallback: $CAUSELENS_OUT)");
  o.languages = app->add_option("--languages", f.languages, "comma list of en,zh");
  o.orders = app->add_option("--orders", f.orders, "comma list of forward,reversed");
  o.conditions = app->add_option("--conditions", f.conditions, "comma list such as en-fwd,zh-rev");
  o.anchor = app->add_option("--anchor", f.anchor, "hidden-state anchor for cosine profiles");
  o.variance_keep = app->add_option("--variance-keep", f.variance_keep, "SVCCA variance fraction");
  o.correct_only = app->add_flag("--correct-only", f.correct_only,
                                 "aggregate RCAR over correctly answered samples only");
  o.export_ratios = app->add_flag("--export-ratios", f.export_ratios,
                                  "also write per-head ratio CSVs");
  o.jobs = app->add_option("--jobs", f.jobs, "worker cap (0: all cores)");
  o.model_id = app->add_option("--model", f.model_id,
                               "expected model id; bundles from other models are rejected");
  return o;
}

causelens::RunConfig build_config(const Flags& f, const Options& o) {
  causelens::RunConfig cfg;
  if (!f.config.empty()) causelens::load_config_file(cfg, f.config);
  if (o.lexicon->count()) cfg.lexicon = f.lexicon;
  if (o.traces->count()) cfg.traces = f.traces;
  if (o.out->count()) cfg.out = f.out;
  if (o.languages->count()) cfg.languages = causelens::parse_languages(causelens::detail::split_list(f.languages));
  if (o.orders->count()) cfg.orders = causelens::parse_orders(causelens::detail::split_list(f.orders));
  if (o.conditions->count()) {
    cfg.conditions = causelens::parse_conditions(causelens::detail::split_list(f.conditions));
  }
  if (o.anchor->count()) cfg.anchor = f.anchor;
  if (o.variance_keep->count()) cfg.variance_keep = f.variance_keep;
  if (o.correct_only->count()) cfg.correct_only = f.correct_only;
  if (o.export_ratios->count()) cfg.export_ratios = f.export_ratios;
  if (o.jobs->count()) cfg.jobs = f.jobs;
  if (o.model_id->count()) cfg.model_id = f.model_id;
  causelens::apply_out_fallback(cfg);
  return cfg;
}

void print_artifacts(const std::string& sub, const causelens::RunConfig& cfg,
                     const causelens::ArtifactList& files) {
  nlohmann::ordered_json j;
  j["subcommand"] = sub;
  j["out"] = cfg.out.generic_string();
  auto arr = nlohmann::ordered_json::array();
  for (const auto& f : files) arr.push_back(f.generic_string());
  j["artifacts"] = std::move(arr);
  std::cout << j.dump() << '\n';
}

int report_error(const std::string& sub, const std::string& code, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = {{"code", code}, {"subcommand", sub}, {"message", message}};
  std::cerr << j.dump() << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"causelens: causal-chain datasets and attention/representation analysis"};
  app.require_subcommand(1);

  Flags flags;
  std::vector<std::pair<CLI::App*, Options>> analysis;
  const std::map<std::string, std::string> about{
      {"generate", "render the annotated dataset (dataset.jsonl)"},
      {"align", "map annotated components onto bundle tokens"},
      {"rcar", "per-component attention trajectories and zh-en differences"},
      {"svcca", "pairwise SVCCA matrix of causal-role trajectories"},
      {"reprsim", "layerwise cosine profiles at the anchor token"},
      {"eval", "score generated answers and build accuracy tables"},
      {"report", "SVG figures plus report.json"},
      {"pipeline", "generate, align, rcar, svcca, reprsim, eval and report"}};
  for (const auto& name : causelens::subcommands()) {
    auto* sub = app.add_subcommand(name, about.at(name));
    analysis.emplace_back(sub, add_common(sub, flags));
  }

  auto* synth = app.add_subcommand("synth", "write deterministic synthetic trace bundles");
  const auto synth_opts = add_common(synth, flags);
  causelens::SynthRequest req;
  synth->add_option("--per-domain", req.per_domain, "triples per domain (0: all)");
  synth->add_option("--layers", req.options.model.num_layers)->check(CLI::PositiveNumber);
  synth->add_option("--heads", req.options.model.num_heads)->check(CLI::PositiveNumber);
  synth->add_option("--hidden-dim", req.options.model.hidden_dim)->check(CLI::PositiveNumber);
  synth->add_option("--seed", req.options.seed);

  auto* validate = app.add_subcommand("validate", "check every bundle under --traces");
  std::string validate_root;
  int validate_jobs = 0;
  validate->add_option("--traces", validate_root)->required();
  validate->add_option("--jobs", validate_jobs);

  std::string active = "causelens";
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(active, "usage", e.what());
  }

  try {
    for (const auto& [sub, opts] : analysis) {
      if (!sub->parsed()) continue;
      active = sub->get_name();
      const auto cfg = build_config(flags, opts);
      print_artifacts(active, cfg, causelens::run(active, cfg));
      return 0;
    }
    if (synth->parsed()) {
      active = "synth";
      auto cfg = build_config(flags, synth_opts);
      cfg.validate();
      if (!cfg.model_id.empty()) req.options.model.id = cfg.model_id;
      const auto n = causelens::run_synth(cfg, req);
      std::cout << nlohmann::ordered_json{{"subcommand", "synth"},
                                          {"traces", cfg.traces.generic_string()},
                                          {"bundles", n}}
                       .dump()
                << '\n';
      return 0;
    }
    if (validate->parsed()) {
      active = "validate";
      const auto report = causelens::run_validate(validate_root, validate_jobs);
      std::cout << report.dump(2) << '\n';
      return report["invalid"].get<std::size_t>() == 0 ? 0 : 1;
    }
  } catch (const Error& e) {
    return report_error(active, std::string(to_string(e.code())), e.what());
  } catch (const std::exception& e) {
    return report_error(active, "internal", e.what());
  }
  return report_error(active, "usage", "no subcommand given");
}
