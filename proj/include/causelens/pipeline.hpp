#pragma once

// Subcommand implementations. Every analysis subcommand runs the same
// per-sample pass (load bundle, map components, compute RCAR, score the
// answer, keep anchor hidden states) and then writes its own artifacts from
// the result, so `pipeline` produces exactly the files of the individual
// subcommands.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <boost/crc.hpp>
#include "json.hpp"

#include "causelens/align.hpp"
#include "causelens/chaingen.hpp"
#include "causelens/config.hpp"
#include "causelens/error.hpp"
#include "causelens/evalreport.hpp"
#include "causelens/metrics.hpp"
#include "causelens/parallel.hpp"
#include "causelens/simrep.hpp"
#include "causelens/synth.hpp"
#include "causelens/traceio.hpp"

namespace causelens {

namespace fs = std::filesystem;

inline constexpr std::string_view kExtractHint =
    "produce trace bundles with the extract harness (python tools/extract/extract.py --model "
    "<id> --dataset <out>/dataset.jsonl --out <traces>) or synthetic ones with `causelens synth`, "
    "then pass --traces <dir>";

// Written artifacts, relative to the output directory, in write order.
using ArtifactList = std::vector<fs::path>;

inline void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  write_text(path, j.dump(2) + "\n");
}

inline std::string findings_summary(const Findings& findings) {
  std::map<std::string, int> counts;
  for (const auto& f : findings) ++counts[std::string(to_string(f.code))];
  std::string out;
  for (const auto& [k, v] : counts) out += (out.empty() ? "" : ",") + k + "=" + std::to_string(v);
  return out;
}

inline nlohmann::ordered_json findings_json(const Findings& findings) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& f : findings) {
    arr.push_back({{"code", to_string(f.code)}, {"location", f.location}, {"message", f.message}});
  }
  return arr;
}

// ---------------------------------------------------------------------------
// Dataset

inline std::vector<AnnotatedSample> dataset_for(const RunConfig& cfg,
                                                 const std::vector<Language>& languages,
                                                 const std::vector<Order>& orders) {
  return generate_dataset(load_lexicon(cfg.lexicon), languages, orders);
}

inline ArtifactList run_generate(const RunConfig& cfg) {
  const auto lexicon = load_lexicon(cfg.lexicon);
  const auto samples = generate_dataset(lexicon, cfg.languages, cfg.orders);
  ArtifactList files;
  write_dataset(cfg.out / "dataset.jsonl", samples);
  files.emplace_back("dataset.jsonl");

  Findings tiling;
  std::map<std::string, std::size_t> per_condition;
  for (const auto& s : samples) {
    auto f = check_span_tiling(s);
    tiling.insert(tiling.end(), f.begin(), f.end());
    ++per_condition[s.condition().name()];
  }
  const auto alignment = validate_cross_alignment(samples);

  nlohmann::ordered_json j;
  j["lexicon_version"] = lexicon.version;
  j["triples"] = lexicon.triple_count();
  j["samples"] = samples.size();
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  for (const auto& c : kAllConditions) {
    if (per_condition.count(c.name())) counts[c.name()] = per_condition[c.name()];
  }
  j["samples_per_condition"] = std::move(counts);
  j["span_tiling_findings"] = findings_json(tiling);
  j["cross_alignment"] = {{"keys_checked", alignment.keys_checked},
                          {"mismatches", alignment.mismatch_count}};
  write_json(cfg.out / "dataset_summary.json", j);
  files.emplace_back("dataset_summary.json");
  return files;
}

// ---------------------------------------------------------------------------
// Per-sample analysis

struct SampleResult {
  const AnnotatedSample* sample = nullptr;
  std::string model_id;
  int layers = 0;
  int heads = 0;
  ComponentTokenMap map;
  std::vector<RcarResult> rcar;  // components, then causal roles
  Eigen::MatrixXd anchor_hidden;
  bool has_anchor = false;
  ScoredSample score;
  Findings findings;
};

struct ConditionResult {
  Condition condition;
  std::vector<SampleResult> samples;
  std::size_t samples_without_traces = 0;
};

struct Analysis {
  std::string lexicon_version;
  std::vector<AnnotatedSample> dataset;
  std::vector<ConditionResult> conditions;

  const ConditionResult* find(const Condition& c) const {
    for (const auto& r : conditions) {
      if (r.condition == c) return &r;
    }
    return nullptr;
  }
};

inline SampleResult analyze_sample(const AnnotatedSample& sample, const fs::path& dir,
                                   const RunConfig& cfg) {
  const auto trace = read_trace(dir);
  if (trace.language != sample.language || trace.order != sample.order) {
    throw Error(ErrorCode::kKeyMismatch,
                dir.string() + ": bundle condition " + trace.condition().name() +
                    " does not match its directory");
  }
  if (!cfg.model_id.empty() && trace.model.id != cfg.model_id) {
    throw Error(ErrorCode::kKeyMismatch, dir.string() + ": bundle comes from model '" +
                                             trace.model.id + "', expected '" + cfg.model_id + "'");
  }
  SampleResult r;
  r.sample = &sample;
  r.model_id = trace.model.id;
  r.layers = trace.model.num_layers;
  r.heads = trace.model.num_heads;
  r.map = map_components(trace, sample);
  r.findings = r.map.findings;

  auto add = [&](const std::string& id, const std::vector<int>& tokens) {
    if (tokens.empty()) {
      r.findings.push_back({ErrorCode::kEmptyTokenSet, sample.key + "/" + id,
                            "no tokens; component skipped"});
      return;
    }
    try {
      auto res = compute_rcar(trace.attention, sample.key, id, tokens);
      for (auto& w : res.warnings) w.location = sample.key + "/" + id + "/" + w.location;
      r.findings.insert(r.findings.end(), res.warnings.begin(), res.warnings.end());
      if (!cfg.export_ratios) res.ratio.resize(0, 0);
      res.warnings.clear();
      r.rcar.push_back(std::move(res));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoValidQueries) throw;
      r.findings.push_back({e.code(), sample.key + "/" + id, e.what()});
    }
  };
  for (const auto& id : expected_component_ids(sample.order)) add(id, r.map.indices(id));
  for (const auto& [role, tokens] : causal_role_sets(r.map, sample)) {
    add(std::string(to_string(role)), tokens);
  }

  auto h = trace.hidden.find(cfg.anchor);
  if (h != trace.hidden.end()) {
    r.anchor_hidden = to_matrix(h->second);
    r.has_anchor = true;
  }

  r.score = score_answer(trace.generated_answer, sample.gold_answer, sample.language);
  r.score.sample_key = sample.key;
  r.score.domain = sample.domain;
  r.score.model = trace.model.id;
  r.score.condition = sample.condition();
  return r;
}

inline void require_traces(const RunConfig& cfg) {
  if (cfg.traces.empty()) {
    throw Error(ErrorCode::kMissingTraces, "no trace directory given; " + std::string(kExtractHint));
  }
  if (!fs::is_directory(cfg.traces)) {
    throw Error(ErrorCode::kMissingTraces, "trace directory '" + cfg.traces.string() +
                                               "' does not exist; " + std::string(kExtractHint));
  }
}

inline Analysis analyze(const RunConfig& cfg) {
  require_traces(cfg);
  const auto conditions = cfg.effective_conditions();
  std::vector<Language> langs;
  std::vector<Order> orders;
  for (const auto& c : conditions) {
    if (std::find(langs.begin(), langs.end(), c.language) == langs.end()) langs.push_back(c.language);
    if (std::find(orders.begin(), orders.end(), c.order) == orders.end()) orders.push_back(c.order);
  }
  Analysis a;
  const auto lexicon = load_lexicon(cfg.lexicon);
  a.lexicon_version = lexicon.version;
  a.dataset = generate_dataset(lexicon, langs, orders);

  for (const auto& cond : conditions) {
    ConditionResult cr;
    cr.condition = cond;
    std::vector<const AnnotatedSample*> todo;
    for (const auto& s : a.dataset) {
      if (s.condition() != cond) continue;
      if (fs::exists(bundle_dir(cfg.traces, cond, s.key) / "manifest.json")) {
        todo.push_back(&s);
      } else {
        ++cr.samples_without_traces;
      }
    }
    if (todo.empty()) {
      throw Error(ErrorCode::kMissingTraces, "no trace bundles for condition " + cond.name() +
                                                 " under '" + cfg.traces.string() + "'; " +
                                                 std::string(kExtractHint));
    }
    cr.samples = parallel_map<SampleResult>(todo.size(), cfg.jobs, [&](std::size_t i) {
      return analyze_sample(*todo[i], bundle_dir(cfg.traces, cond, todo[i]->key), cfg);
    });
    const int L = cr.samples.front().layers;
    for (const auto& s : cr.samples) {
      if (s.layers != L) {
        throw Error(ErrorCode::kShapeMismatch, cond.name() + "/" + s.sample->key +
                                                   ": layer count differs within condition");
      }
    }
    a.conditions.push_back(std::move(cr));
  }
  return a;
}

// ---------------------------------------------------------------------------
// Aggregates

inline std::vector<std::string> aggregate_ids(Order order) {
  auto ids = expected_component_ids(order);
  for (auto r : kAllRoles) ids.emplace_back(to_string(r));
  return ids;
}

// Per condition, aggregates in component order; components without any
// contributing sample are omitted.
inline std::map<Condition, std::vector<ConditionAggregate>> aggregates(const Analysis& a,
                                                                      const RunConfig& cfg) {
  std::map<Condition, std::vector<ConditionAggregate>> out;
  for (const auto& cr : a.conditions) {
    auto& list = out[cr.condition];
    for (const auto& id : aggregate_ids(cr.condition.order)) {
      std::vector<Eigen::VectorXd> traj;
      for (const auto& s : cr.samples) {
        if (cfg.correct_only && !s.score.correct) continue;
        for (const auto& r : s.rcar) {
          if (r.component_id == id) traj.push_back(r.layer_rcar);
        }
      }
      if (!traj.empty()) list.push_back(aggregate_trajectories(cr.condition, id, traj));
    }
    if (list.empty()) {
      throw Error(ErrorCode::kEmptyInput,
                  "no samples left to aggregate for " + cr.condition.name() +
                      (cfg.correct_only ? " after the correct-only filter" : ""));
    }
  }
  return out;
}

inline std::vector<TrajectoryMatrix> trajectories(
    const std::map<Condition, std::vector<ConditionAggregate>>& aggs,
    const std::vector<Condition>& order) {
  std::vector<TrajectoryMatrix> out;
  for (const auto& c : order) {
    auto it = aggs.find(c);
    if (it == aggs.end()) continue;
    std::vector<ConditionAggregate> roles;
    for (const auto& agg : it->second) {
      if (agg.component_id == "cause" || agg.component_id == "intermediate" ||
          agg.component_id == "final") {
        roles.push_back(agg);
      }
    }
    out.push_back(build_trajectory(roles));
  }
  return out;
}

inline std::vector<ComponentDiff> forward_diffs(
    const std::map<Condition, std::vector<ConditionAggregate>>& aggs) {
  auto en = aggs.find({Language::kEn, Order::kForward});
  auto zh = aggs.find({Language::kZh, Order::kForward});
  if (en == aggs.end() || zh == aggs.end()) return {};
  AggregateSet e, z;
  for (const auto& a : en->second) e[a.component_id] = a;
  for (const auto& a : zh->second) z[a.component_id] = a;
  std::vector<std::string> ids;
  for (auto id : component::kSyntactic) {
    if (e.count(std::string(id)) && z.count(std::string(id))) ids.emplace_back(id);
  }
  return component_diff(z, e, ids);
}

struct CosineRun {
  std::vector<CosineProfile> profiles;
  nlohmann::ordered_json skipped = nlohmann::ordered_json::array();
};

inline CosineRun cosine_profiles(const Analysis& a, const RunConfig& cfg) {
  static const std::array<std::pair<Condition, Condition>, 4> kPairs{{
      {{Language::kEn, Order::kForward}, {Language::kZh, Order::kForward}},
      {{Language::kEn, Order::kForward}, {Language::kEn, Order::kReversed}},
      {{Language::kZh, Order::kForward}, {Language::kZh, Order::kReversed}},
      {{Language::kEn, Order::kReversed}, {Language::kZh, Order::kReversed}},
  }};
  auto vectors = [&](const ConditionResult& cr, AnchorVectors& vec, CorrectnessMap& ok) {
    for (const auto& s : cr.samples) {
      if (!s.has_anchor) {
        throw Error(ErrorCode::kMissingBlob, cr.condition.name() + "/" + s.sample->key +
                                                 ": no hidden states for anchor '" + cfg.anchor +
                                                 "'");
      }
      vec[s.sample->key] = s.anchor_hidden;
      ok[s.sample->key] = s.score.correct;
    }
  };
  CosineRun run;
  for (const auto& [ca, cb] : kPairs) {
    const auto* ra = a.find(ca);
    const auto* rb = a.find(cb);
    if (ra == nullptr || rb == nullptr) continue;
    AnchorVectors va, vb;
    CorrectnessMap oka, okb;
    vectors(*ra, va, oka);
    vectors(*rb, vb, okb);
    const auto name = ca.name() + "|" + cb.name();
    try {
      run.profiles.push_back(layerwise_cosine(va, vb, oka, okb, name));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kEmptyProfile) throw;
      run.skipped.push_back({{"pair", name}, {"code", to_string(e.code())}, {"message", e.what()}});
    }
  }
  return run;
}

// ---------------------------------------------------------------------------
// Writers

inline ArtifactList write_align(const Analysis& a, const RunConfig& cfg) {
  ArtifactList files;
  nlohmann::ordered_json summary;
  for (const auto& cr : a.conditions) {
    std::string lines;
    std::size_t partial = 0, empty = 0;
    for (const auto& s : cr.samples) {
      auto j = to_json(s.map);
      lines += j.dump() + "\n";
      partial += static_cast<std::size_t>(
          std::count(s.map.partial_overlap.begin(), s.map.partial_overlap.end(), true));
      for (const auto& f : s.map.findings) empty += f.code == ErrorCode::kEmptyComponent;
    }
    const fs::path rel = fs::path("align") / (cr.condition.name() + ".jsonl");
    write_text(cfg.out / rel, lines);
    files.push_back(rel);
    summary[cr.condition.name()] = {{"samples", cr.samples.size()},
                                    {"samples_without_traces", cr.samples_without_traces},
                                    {"partial_overlap_tokens", partial},
                                    {"empty_components", empty}};
  }
  write_json(cfg.out / "align" / "summary.json", summary);
  files.emplace_back("align/summary.json");
  return files;
}

inline ArtifactList write_rcar(const Analysis& a, const RunConfig& cfg) {
  ArtifactList files;
  const auto aggs = aggregates(a, cfg);
  std::vector<ConditionAggregate> flat;
  for (const auto& cr : a.conditions) {
    const auto& list = aggs.at(cr.condition);
    flat.insert(flat.end(), list.begin(), list.end());
  }
  write_text(cfg.out / "rcar" / "trajectories.csv", trajectories_csv(flat));
  files.emplace_back("rcar/trajectories.csv");

  const auto diffs = forward_diffs(aggs);
  if (!diffs.empty()) {
    write_text(cfg.out / "rcar" / "component_diff.csv", diffs_csv(diffs));
    files.emplace_back("rcar/component_diff.csv");
  }
  if (cfg.export_ratios) {
    for (const auto& cr : a.conditions) {
      std::vector<RcarResult> all;
      for (const auto& s : cr.samples) all.insert(all.end(), s.rcar.begin(), s.rcar.end());
      const fs::path rel = fs::path("rcar") / ("ratios_" + cr.condition.name() + ".csv");
      write_text(cfg.out / rel, ratios_csv(all));
      files.push_back(rel);
    }
  }

  nlohmann::ordered_json summary;
  summary["correct_only"] = cfg.correct_only;
  for (const auto& cr : a.conditions) {
    Findings all;
    std::size_t used = 0;
    for (const auto& s : cr.samples) {
      all.insert(all.end(), s.findings.begin(), s.findings.end());
      used += !cfg.correct_only || s.score.correct;
    }
    summary["conditions"][cr.condition.name()] = {
        {"samples", cr.samples.size()},
        {"samples_aggregated", used},
        {"samples_without_traces", cr.samples_without_traces},
        {"findings", findings_summary(all)}};
  }
  write_json(cfg.out / "rcar" / "summary.json", summary);
  files.emplace_back("rcar/summary.json");
  return files;
}

inline ArtifactList write_svcca(const Analysis& a, const RunConfig& cfg) {
  const auto conds = cfg.effective_conditions();
  const auto traj = trajectories(aggregates(a, cfg), conds);
  const auto n = traj.size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  std::vector<SvccaScore> scores;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double s = svcca(traj[i], traj[j], cfg.variance_keep);
      m(i, j) = m(j, i) = s;
      scores.push_back({traj[i].condition.name() + "|" + traj[j].condition.name(), s,
                        cfg.variance_keep});
    }
  }
  std::string csv = "condition";
  for (const auto& t : traj) csv += "," + t.condition.name();
  csv += "\n";
  for (std::size_t i = 0; i < n; ++i) {
    csv += traj[i].condition.name();
    for (std::size_t j = 0; j < n; ++j) csv += "," + format_number(m(i, j));
    csv += "\n";
  }
  write_text(cfg.out / "svcca" / "matrix.csv", csv);
  write_text(cfg.out / "svcca" / "scores.csv", svcca_csv(scores));
  return {"svcca/matrix.csv", "svcca/scores.csv"};
}

inline ArtifactList write_reprsim(const Analysis& a, const RunConfig& cfg) {
  const auto run = cosine_profiles(a, cfg);
  if (run.profiles.empty()) {
    throw Error(ErrorCode::kEmptyProfile,
                "no condition pair has both-correct samples for the cosine profile");
  }
  write_text(cfg.out / "reprsim" / "cosine.csv", cosine_csv(run.profiles));
  nlohmann::ordered_json summary;
  summary["anchor"] = cfg.anchor;
  for (const auto& p : run.profiles) {
    summary["pairs"][p.pair] = {{"paired_samples", p.count.empty() ? 0 : *std::max_element(p.count.begin(), p.count.end())},
                                {"findings", findings_json(p.findings)}};
  }
  summary["skipped_pairs"] = run.skipped;
  write_json(cfg.out / "reprsim" / "summary.json", summary);
  return {"reprsim/cosine.csv", "reprsim/summary.json"};
}

inline std::vector<ScoredSample> scored_samples(const Analysis& a) {
  std::vector<ScoredSample> out;
  for (const auto& cr : a.conditions) {
    for (const auto& s : cr.samples) out.push_back(s.score);
  }
  return out;
}

inline ArtifactList write_eval(const Analysis& a, const RunConfig& cfg) {
  const auto scored = scored_samples(a);
  std::string lines;
  for (const auto& s : scored) {
    nlohmann::ordered_json j;
    j["sample_key"] = s.sample_key;
    j["condition"] = s.condition.name();
    j["domain"] = s.domain;
    j["model"] = s.model;
    j["generated_answer"] = s.generated_answer;
    j["gold_answer"] = s.gold_answer;
    j["correct"] = s.correct;
    j["normalized_generated"] = s.normalized_generated;
    j["normalized_gold"] = s.normalized_gold;
    j["findings"] = findings_json(s.findings);
    lines += j.dump() + "\n";
  }
  write_text(cfg.out / "eval" / "scored.jsonl", lines);
  const auto table = accuracy_table(scored);
  write_text(cfg.out / "eval" / "accuracy.md", table.to_markdown());
  write_text(cfg.out / "eval" / "accuracy.csv", table.to_csv());
  return {"eval/scored.jsonl", "eval/accuracy.md", "eval/accuracy.csv"};
}

inline FigureInputs figure_inputs(const Analysis& a, const RunConfig& cfg) {
  FigureInputs in;
  const auto aggs = aggregates(a, cfg);
  for (const auto& cr : a.conditions) {
    for (const auto& agg : aggs.at(cr.condition)) {
      if (agg.component_id != "cause" && agg.component_id != "intermediate" &&
          agg.component_id != "final") {
        in.aggregates.push_back(agg);
      }
    }
  }
  in.trajectories = trajectories(aggs, cfg.effective_conditions());
  in.diffs = forward_diffs(aggs);
  in.cosine = cosine_profiles(a, cfg).profiles;
  return in;
}

inline std::string file_crc32(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", crc.checksum());
  return buf;
}

// Index of everything under the output directory, plus the configuration
// that produced it.
inline void write_report_index(const RunConfig& cfg, const std::string& lexicon_version,
                               const std::set<std::string>& models) {
  std::vector<fs::path> all;
  for (const auto& e : fs::recursive_directory_iterator(cfg.out)) {
    if (!e.is_regular_file()) continue;
    auto rel = fs::relative(e.path(), cfg.out);
    if (rel == "report.json") continue;
    all.push_back(rel);
  }
  std::sort(all.begin(), all.end());
  nlohmann::ordered_json j;
  j["tool"] = "causelens";
  j["trace_format_version"] = kTraceFormatVersion;
  j["lexicon_version"] = lexicon_version;
  j["models"] = std::vector<std::string>(models.begin(), models.end());
  j["config"] = cfg.to_json();
  auto arts = nlohmann::ordered_json::array();
  for (const auto& rel : all) {
    arts.push_back({{"path", rel.generic_string()},
                    {"bytes", fs::file_size(cfg.out / rel)},
                    {"crc32", file_crc32(cfg.out / rel)}});
  }
  j["artifacts"] = std::move(arts);
  write_json(cfg.out / "report.json", j);
}

inline ArtifactList write_report(const Analysis& a, const RunConfig& cfg) {
  auto files = emit_figures(figure_inputs(a, cfg), cfg.out);
  std::set<std::string> models;
  for (const auto& cr : a.conditions) {
    for (const auto& s : cr.samples) models.insert(s.model_id);
  }
  write_report_index(cfg, a.lexicon_version, models);
  files.emplace_back("report.json");
  return files;
}

// ---------------------------------------------------------------------------
// Synthetic traces and validation

struct SynthRequest {
  SynthOptions options;
  int per_domain = 0;  // 0: every triple
};

inline std::size_t run_synth(const RunConfig& cfg, const SynthRequest& req) {
  if (cfg.traces.empty()) throw Error(ErrorCode::kConfig, "synth needs --traces <dir> to write into");
  const auto conditions = cfg.effective_conditions();
  const auto samples = dataset_for(cfg, {kAllLanguages.begin(), kAllLanguages.end()},
                                   {kAllOrders.begin(), kAllOrders.end()});
  std::map<std::string, int> seen;
  std::vector<const AnnotatedSample*> todo;
  for (const auto& c : conditions) {
    seen.clear();
    for (const auto& s : samples) {
      if (s.condition() != c) continue;
      if (req.per_domain > 0 && seen[s.domain]++ >= req.per_domain) continue;
      todo.push_back(&s);
    }
  }
  parallel_map<int>(todo.size(), cfg.jobs, [&](std::size_t i) {
    const auto& s = *todo[i];
    write_trace(synthesize_trace(s, req.options), bundle_dir(cfg.traces, s.condition(), s.key));
    return 0;
  });
  return todo.size();
}

// Validates every bundle directory under root (<condition>/<key>/).
inline nlohmann::ordered_json run_validate(const fs::path& root, int jobs) {
  if (!fs::is_directory(root)) {
    throw Error(ErrorCode::kMissingTraces, "trace directory '" + root.string() + "' does not exist");
  }
  std::vector<fs::path> dirs;
  for (const auto& cond : fs::directory_iterator(root)) {
    if (!cond.is_directory()) continue;
    for (const auto& d : fs::directory_iterator(cond.path())) {
      if (d.is_directory()) dirs.push_back(d.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  const auto results =
      parallel_map<Findings>(dirs.size(), jobs, [&](std::size_t i) { return validate_trace(dirs[i]); });
  nlohmann::ordered_json j;
  j["bundles"] = dirs.size();
  std::size_t invalid = 0;
  auto bad = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    if (results[i].empty()) continue;
    ++invalid;
    bad.push_back({{"bundle", fs::relative(dirs[i], root).generic_string()},
                   {"findings", findings_json(results[i])}});
  }
  j["invalid"] = invalid;
  j["reports"] = std::move(bad);
  return j;
}

// ---------------------------------------------------------------------------
// Dispatch

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> k{"generate", "align", "rcar",   "svcca",
                                          "reprsim",  "eval",  "report", "pipeline"};
  return k;
}

inline ArtifactList run(const std::string& subcommand, const RunConfig& cfg) {
  cfg.validate();
  if (subcommand == "generate") return run_generate(cfg);
  if (std::find(subcommands().begin(), subcommands().end(), subcommand) == subcommands().end()) {
    throw Error(ErrorCode::kConfig, "unknown subcommand '" + subcommand + "'");
  }
  const auto a = analyze(cfg);
  if (subcommand == "align") return write_align(a, cfg);
  if (subcommand == "rcar") return write_rcar(a, cfg);
  if (subcommand == "svcca") return write_svcca(a, cfg);
  if (subcommand == "reprsim") return write_reprsim(a, cfg);
  if (subcommand == "eval") return write_eval(a, cfg);
  if (subcommand == "report") return write_report(a, cfg);

  ArtifactList files = run_generate(cfg);
  for (auto* step : {&write_align, &write_rcar, &write_svcca, &write_reprsim, &write_eval}) {
    auto more = step(a, cfg);
    files.insert(files.end(), more.begin(), more.end());
  }
  auto more = write_report(a, cfg);
  files.insert(files.end(), more.begin(), more.end());
  return files;
}

}  // namespace causelens
