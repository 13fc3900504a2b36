// Copyright 2026 The jurybt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "jurybt/cli.h"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "jurybt/calibration.h"
#include "jurybt/consistency.h"
#include "jurybt/core.h"
#include "jurybt/debias.h"
#include "jurybt/eval.h"
#include "jurybt/judge_client.h"
#include "jurybt/models.h"
#include "jurybt/parallel.h"
#include "jurybt/synth.h"

namespace jurybt {
namespace {

using Json = nlohmann::ordered_json;

// Options that do not influence any output and so stay out of the run key.
const std::set<std::string> kNonSemanticOptions = {"workers", "manifest",
                                                   "concurrency"};

struct Flags {
  std::string data;
  std::string scores;
  std::vector<std::string> judges;
  std::vector<std::string> exclude_judges;
  std::vector<std::string> aspects;
  int workers = DefaultWorkerCount();
  std::uint64_t seed = 0;
  std::string out;
  std::string manifest;

  // debias / cycles
  bool jury = false;
  // fit
  std::string variant = "bt-sigma";
  double tol = 1e-8;
  int max_iter = 5000;
  // calibrate
  double grid_min = 0.1;
  double grid_max = 10.0;
  int grid_size = 25;
  int bins = 10;
  std::string model_out;
  // eval
  std::vector<std::string> models;
  std::string temps;
  std::string table;
  std::string scatter;
  // synth
  std::string config;
  std::string truth;
  std::string scores_out;
  // judge
  std::string skeleton;
  std::string aspects_file;
  std::string template_spec = "summeval";
  std::string pairs = "both";
  std::string judge_id;
  std::string base_url;
  std::string model_name;
  std::string api_key_env = "JURYBT_API_KEY";
  int top_logprobs = 20;
  int concurrency = 4;
  int max_retries = 3;
  int backoff_ms = 500;
  int timeout = 60;
  std::string failures;
};

std::string SingleLine(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  std::replace(text.begin(), text.end(), '\r', ' ');
  return text;
}

void EmitError(std::ostream& err, const std::string& command,
               const std::string& message) {
  Json j;
  j["error"] = SingleLine(message);
  j["command"] = command;
  err << j.dump() << std::endl;
}

// Aligned plain-text table; the first row is the header.
void WriteTextTable(const std::vector<std::vector<std::string>>& rows,
                    std::ostream& out) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    widths.resize(std::max(widths.size(), row.size()), 0);
    for (std::size_t c = 0; c < row.size(); ++c) {
      widths[c] = std::max(widths[c], row[c].size());
    }
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      if (c > 0) out << "  ";
      out << std::left << std::setw(static_cast<int>(widths[c])) << rows[r][c];
    }
    out << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t w : widths) total += w;
      out << std::string(total + 2 * (widths.size() - 1), '-') << '\n';
    }
  }
  out << std::right;
}

std::string Fixed(double value, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << value;
  return s.str();
}

std::string Canonical(const std::string& path) {
  std::error_code ec;
  auto p = std::filesystem::weakly_canonical(path, ec);
  return ec ? path : p.string();
}

// Bookkeeping for one invocation: inputs are hashed as they are read,
// outputs are written whole and hashed for the manifest.
class Run {
 public:
  Run(const CLI::App& sub, const Flags& flags)
      : command_(sub.get_name()), start_(std::chrono::steady_clock::now()) {
    for (const CLI::Option* opt : sub.get_options()) {
      std::string name = opt->get_name();
      if (name == "--help" || name == "-h") continue;
      name.erase(0, name.find_first_not_of('-'));
      Json value;
      if (opt->count() > 0) {
        const auto& results = opt->results();
        if (opt->get_expected_max() > 1 || opt->get_type_size_max() > 1 ||
            results.size() > 1) {
          value = results;
        } else if (opt->get_type_size() == 0) {
          value = true;
        } else {
          value = results.empty() ? "" : results.front();
        }
      } else if (opt->get_type_size() == 0) {
        value = false;
      } else {
        value = opt->get_default_str();
      }
      config_[name] = std::move(value);
    }
    manifest_path_ = flags.manifest;
  }

  const std::string& command() const { return command_; }

  // Records the digest of an input file; empty paths are ignored.
  void Input(const std::string& path) {
    if (path.empty()) return;
    if (!std::filesystem::is_regular_file(path)) {
      throw Error("input file not found: " + path);
    }
    inputs_[path] = Sha256File(path);
  }

  void Output(const std::string& path,
              const std::function<void(std::ostream&)>& write) {
    for (const auto& [in, digest] : inputs_) {
      if (Canonical(in) == Canonical(path)) {
        throw Error("output would overwrite input " + path);
      }
    }
    {
      std::ofstream f(path, std::ios::binary | std::ios::trunc);
      if (!f) throw Error("cannot write " + path);
      write(f);
      if (!f) throw Error("write failed for " + path);
    }
    if (std::find(outputs_.begin(), outputs_.end(), path) == outputs_.end()) {
      outputs_.push_back(path);
    }
    if (primary_.empty()) primary_ = path;
  }

  // Registers a file written by a module rather than through Output().
  void ExternalOutput(const std::string& path) {
    if (std::filesystem::exists(path)) outputs_.push_back(path);
    if (primary_.empty()) primary_ = path;
  }

  void WriteManifest() {
    std::string path = manifest_path_;
    if (path.empty()) {
      path = primary_.empty() ? "jurybt-" + command_ + ".manifest.json"
                              : primary_ + ".manifest.json";
    }
    Json semantic;
    semantic["tool"] = "jurybt";
    semantic["version"] = JURYBT_VERSION;
    semantic["command"] = command_;
    Json config = Json::object();
    for (const auto& [key, value] : config_.items()) {
      if (!kNonSemanticOptions.contains(key)) config[key] = value;
    }
    semantic["config"] = config;
    Json inputs = Json::object();
    for (const auto& [p, digest] : inputs_) inputs[p] = digest;
    semantic["inputs"] = inputs;

    Json manifest;
    manifest["tool"] = "jurybt";
    manifest["version"] = JURYBT_VERSION;
    manifest["command"] = command_;
    manifest["config"] = config_;
    manifest["inputs"] = inputs;
    Json outputs = Json::object();
    for (const std::string& p : outputs_) outputs[p] = Sha256File(p);
    manifest["outputs"] = outputs;
    manifest["run_key"] = Sha256Hex(semantic.dump());
    manifest["wall_time_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      start_)
            .count();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write manifest " + path);
    f << manifest.dump(2) << '\n';
  }

 private:
  std::string command_;
  std::chrono::steady_clock::time_point start_;
  Json config_ = Json::object();
  std::map<std::string, std::string> inputs_;
  std::vector<std::string> outputs_;
  std::string primary_;
  std::string manifest_path_;
};

Dataset LoadDataset(Run& run, const Flags& f, bool with_scores) {
  run.Input(f.data);
  std::vector<ComparisonRecord> records = ReadRecordsFile(f.data);
  std::set<std::string> present;
  for (const auto& r : records) present.insert(r.judge);
  for (const std::string& j : f.judges) {
    if (!present.contains(j)) throw Error("unknown judge in include list: " + j);
  }
  const std::set<std::string> include(f.judges.begin(), f.judges.end());
  const std::set<std::string> exclude(f.exclude_judges.begin(),
                                      f.exclude_judges.end());
  const std::set<std::string> aspects(f.aspects.begin(), f.aspects.end());
  std::erase_if(records, [&](const ComparisonRecord& r) {
    return (!include.empty() && !include.contains(r.judge)) ||
           exclude.contains(r.judge) ||
           (!aspects.empty() && !aspects.contains(r.aspect));
  });
  std::optional<HumanScores> human;
  if (with_scores && !f.scores.empty()) {
    run.Input(f.scores);
    human = ReadHumanScoresFile(f.scores);
  }
  return Dataset::Build(std::move(records), std::move(human));
}

HumanScores LoadScores(Run& run, const std::string& path) {
  run.Input(path);
  return ReadHumanScoresFile(path);
}

int CmdIngest(Run& run, const Flags& f, std::ostream& out) {
  const Dataset ds = LoadDataset(run, f, true);
  const DebiasedPairSet pairs = Symmetrize(ds);
  std::size_t min_items = SIZE_MAX, max_items = 0;
  for (std::size_t c = 0; c < ds.contexts().size(); ++c) {
    min_items = std::min(min_items, ds.items(c).size());
    max_items = std::max(max_items, ds.items(c).size());
  }
  int complete = 0;
  for (const auto& [key, obs] : ds.groups()) complete += ds.IsComplete(key);
  std::map<std::string, int> coverage;
  for (const PairGroup& g : pairs.groups()) {
    for (const DebiasedPair& p : g.pairs) ++coverage[CoverageName(p.coverage)];
  }
  int missing_scores = 0;
  if (ds.human_scores()) {
    for (std::size_t c = 0; c < ds.contexts().size(); ++c) {
      for (const std::string& a : ds.aspects()) {
        for (const std::string& item : ds.items(c)) {
          missing_scores +=
              !ds.human_scores()->Get(ds.contexts()[c], a, item).has_value();
        }
      }
    }
  }

  Json j;
  j["records"] = ds.records().size();
  j["judges"] = ds.judges();
  j["aspects"] = ds.aspects();
  j["contexts"] = ds.contexts().size();
  j["items_per_context"] = {{"min", min_items}, {"max", max_items}};
  j["groups"] = ds.groups().size();
  j["complete_groups"] = complete;
  Json cov = Json::object();
  for (const auto& [name, n] : coverage) cov[name] = n;
  j["pair_coverage"] = cov;
  if (ds.human_scores()) {
    j["human_scores"] = ds.human_scores()->size();
    j["items_missing_human_score"] = missing_scores;
  }
  if (!f.out.empty()) {
    run.Output(f.out, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
  }

  std::vector<std::vector<std::string>> rows = {{"field", "value"}};
  rows.push_back({"records", std::to_string(ds.records().size())});
  rows.push_back({"judges", std::to_string(ds.judges().size())});
  rows.push_back({"aspects", std::to_string(ds.aspects().size())});
  rows.push_back({"contexts", std::to_string(ds.contexts().size())});
  rows.push_back({"items per context",
                  std::to_string(min_items) + ".." + std::to_string(max_items)});
  rows.push_back({"complete groups", std::to_string(complete) + "/" +
                                         std::to_string(ds.groups().size())});
  for (const auto& [name, n] : coverage) {
    rows.push_back({"pairs (" + name + ")", std::to_string(n)});
  }
  if (ds.human_scores()) {
    rows.push_back({"items missing human score", std::to_string(missing_scores)});
  }
  WriteTextTable(rows, out);
  return 0;
}

int CmdDebias(Run& run, const Flags& f, std::ostream& out) {
  const DebiasedPairSet pairs = Symmetrize(LoadDataset(run, f, false));
  const DebiasedPairSet result = f.jury ? AverageAcrossJudges(pairs) : pairs;
  run.Output(f.out, [&](std::ostream& o) { WriteDebiasedJsonl(result, o); });
  std::map<std::string, int> coverage;
  for (const PairGroup& g : result.groups()) {
    for (const DebiasedPair& p : g.pairs) ++coverage[CoverageName(p.coverage)];
  }
  std::vector<std::vector<std::string>> rows = {{"coverage", "pairs"}};
  for (const auto& [name, n] : coverage) rows.push_back({name, std::to_string(n)});
  WriteTextTable(rows, out);
  return 0;
}

int CmdCycles(Run& run, const Flags& f, std::ostream& out) {
  const DebiasedPairSet pairs = Symmetrize(LoadDataset(run, f, false));
  const ConsistencyReport report =
      f.jury ? AnalyzeJuryConsistency(pairs) : AnalyzeConsistency(pairs);
  const Catalog catalog =
      f.jury ? AverageAcrossJudges(pairs).catalog() : pairs.catalog();
  run.Output(f.out,
             [&](std::ostream& o) { WriteCycleCsv(report, catalog, o); });
  std::vector<std::vector<std::string>> rows = {
      {"judge", "aspect", "mean_cycle_rate", "contexts"}};
  for (const auto& [key, rate] : report.averages) {
    rows.push_back({catalog.judges[key.first], catalog.aspects[key.second],
                    Fixed(rate.mean_cycle_rate), std::to_string(rate.contexts)});
  }
  WriteTextTable(rows, out);
  if (!report.skipped.empty()) {
    out << report.skipped.size()
        << " group(s) skipped: incomplete coverage or fewer than 3 items\n";
  }
  return 0;
}

FitOptions MakeFitOptions(const Flags& f) {
  FitOptions o;
  o.tol = f.tol;
  o.max_iter = f.max_iter;
  o.seed = f.seed;
  o.workers = f.workers;
  return o;
}

void PrintModelSummary(const FittedModel& m, std::ostream& out) {
  std::vector<std::vector<std::string>> rows = {{"field", "value"}};
  rows.push_back({"variant", VariantName(m.variant)});
  rows.push_back({"discriminator mode", ModeName(m.mode)});
  rows.push_back({"log-likelihood", Fixed(m.diagnostics.log_likelihood, 6)});
  rows.push_back({"iterations", std::to_string(m.diagnostics.iterations)});
  rows.push_back({"converged", m.diagnostics.converged ? "yes" : "no"});
  std::ostringstream g;
  g << std::scientific << std::setprecision(2)
    << m.diagnostics.gradient_inf_norm;
  rows.push_back({"gradient inf-norm", g.str()});
  WriteTextTable(rows, out);
  if (m.mode != DiscriminatorMode::kFixedUnit) {
    out << '\n';
    std::vector<std::vector<std::string>> s = {{"discriminator", "sigma"}};
    for (const auto& [key, sigma] : m.sigmas) s.push_back({key, Fixed(sigma)});
    WriteTextTable(s, out);
  }
  for (const std::string& w : m.diagnostics.warnings) {
    out << "warning: " << w << '\n';
  }
}

int CmdFit(Run& run, const Flags& f, std::ostream& out) {
  const Dataset ds = LoadDataset(run, f, false);
  const FittedModel model =
      Fit(Symmetrize(ds), ParseVariant(f.variant), MakeFitOptions(f));
  run.Output(f.out, [&](std::ostream& o) { o << ModelToJson(model) << '\n'; });
  PrintModelSummary(model, out);
  return 0;
}

int CmdCalibrate(Run& run, const Flags& f, std::ostream& out) {
  const DebiasedPairSet pairs = Symmetrize(LoadDataset(run, f, false));
  const HumanScores human = LoadScores(run, f.scores);
  if (!(f.grid_min > 0.0) || f.grid_max < f.grid_min || f.grid_size < 1) {
    throw Error("temperature grid needs 0 < min <= max and size >= 1");
  }
  const TemperatureMap temps = FitTemperatures(
      pairs, human, LogSpacedGrid(f.grid_min, f.grid_max, f.grid_size), f.bins);
  run.Output(f.out,
             [&](std::ostream& o) { o << TemperaturesToJson(temps) << '\n'; });

  const Catalog& c = pairs.catalog();
  const DebiasedPairSet annealed =
      pairs.Transform([&](const PairGroup& g, double p) {
        auto it = temps.find(c.judges[g.key.judge] + "@" +
                             c.aspects[g.key.aspect]);
        return it == temps.end() ? p : Anneal(p, it->second);
      });
  std::vector<std::vector<std::string>> rows = {
      {"judge@aspect", "temperature", "ece_raw", "ece_annealed"}};
  for (int j = 0; j < static_cast<int>(c.judges.size()); ++j) {
    for (int a = 0; a < static_cast<int>(c.aspects.size()); ++a) {
      const std::string key = c.judges[j] + "@" + c.aspects[a];
      auto it = temps.find(key);
      if (it == temps.end()) continue;
      rows.push_back({key, Fixed(it->second),
                      Fixed(Ece(pairs, j, a, human, f.bins).ece),
                      Fixed(Ece(annealed, j, a, human, f.bins).ece)});
    }
  }
  WriteTextTable(rows, out);

  if (!f.model_out.empty()) {
    const FittedModel model = TempBt(pairs, temps, MakeFitOptions(f));
    run.Output(f.model_out,
               [&](std::ostream& o) { o << ModelToJson(model) << '\n'; });
  }
  return 0;
}

std::vector<std::string> ScoredAspects(
    const std::vector<std::pair<std::string, ScoreTable>>& tables,
    const std::vector<std::string>& filter) {
  std::set<std::string> aspects;
  for (const auto& [label, table] : tables) {
    for (const auto& [key, items] : table.entries()) aspects.insert(key.second);
  }
  if (!filter.empty()) {
    const std::set<std::string> keep(filter.begin(), filter.end());
    std::erase_if(aspects, [&](const std::string& a) { return !keep.contains(a); });
  }
  return {aspects.begin(), aspects.end()};
}

std::string ScatterPath(const std::string& base, const std::string& scope) {
  if (scope == "ALL") return base;
  const std::filesystem::path p(base);
  return (p.parent_path() /
          (p.stem().string() + "." + scope + p.extension().string()))
      .string();
}

int CmdEval(Run& run, const Flags& f, std::ostream& out) {
  const HumanScores human = LoadScores(run, f.scores);
  std::vector<std::pair<std::string, ScoreTable>> tables;
  std::vector<std::pair<std::string, FittedModel>> sigma_models;
  std::map<std::string, int> label_uses;
  auto unique_label = [&](const std::string& base) {
    const int n = ++label_uses[base];
    return n == 1 ? base : base + "#" + std::to_string(n);
  };
  for (const std::string& spec : f.models) {
    std::string path = spec;
    std::string label;
    if (const auto eq = spec.find('=');
        eq != std::string::npos && !std::filesystem::exists(spec)) {
      label = spec.substr(0, eq);
      path = spec.substr(eq + 1);
    }
    run.Input(path);
    std::ifstream in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    FittedModel model = ModelFromJson(buf.str());
    label = unique_label(label.empty() ? VariantName(model.variant) : label);
    tables.emplace_back(label, ScoreTable::FromModel(model));
    if (model.mode != DiscriminatorMode::kFixedUnit) {
      sigma_models.emplace_back(label, std::move(model));
    }
  }

  std::optional<DebiasedPairSet> pairs;
  if (!f.data.empty()) {
    pairs = Symmetrize(LoadDataset(run, f, false));
    tables.emplace_back(unique_label("avg-prob"), AvgProbScores(*pairs));
    if (!f.temps.empty()) {
      run.Input(f.temps);
      std::ifstream in(f.temps);
      std::stringstream buf;
      buf << in.rdbuf();
      const FittedModel tb =
          TempBt(*pairs, TemperaturesFromJson(buf.str()), MakeFitOptions(f));
      tables.emplace_back(unique_label("temp-bt"), ScoreTable::FromModel(tb));
    }
  } else if (!f.temps.empty()) {
    throw Error("--temps requires --data");
  }
  if (tables.empty()) throw Error("nothing to evaluate: pass --model or --data");

  const std::vector<std::string> aspects = ScoredAspects(tables, f.aspects);
  std::vector<std::pair<std::string, EvalReport>> rows;
  Json report;
  Json methods = Json::object();
  for (const auto& [label, table] : tables) {
    EvalReport r = Evaluate(table, human, aspects);
    methods[label] = Json::parse(EvalReportToJson(r));
    rows.emplace_back(label, std::move(r));
  }
  report["aspects"] = aspects;
  report["methods"] = methods;

  std::optional<ReliabilityReport> scatter_source;
  if (pairs && !sigma_models.empty()) {
    Json reliability = Json::object();
    for (const auto& [label, model] : sigma_models) {
      ReliabilityReport rel = ComputeReliability(model, *pairs, human);
      reliability[label] = Json::parse(ReliabilityToJson(rel));
      if (!scatter_source) scatter_source = std::move(rel);
    }
    report["reliability"] = reliability;
  }

  if (!f.scatter.empty() && !scatter_source) {
    throw Error("--scatter needs --data and a model with learned sigmas");
  }
  run.Output(f.out, [&](std::ostream& o) { o << report.dump(2) << '\n'; });
  if (!f.table.empty()) {
    run.Output(f.table, [&](std::ostream& o) { WriteMethodTableCsv(rows, o); });
  }
  if (!f.scatter.empty()) {
    for (const auto& [scope, data] : scatter_source->scopes) {
      run.Output(ScatterPath(f.scatter, scope),
                 [&](std::ostream& o) { WriteScatterCsv(data, o); });
    }
  }
  WriteMethodTableText(rows, out);
  return 0;
}

int CmdSynth(Run& run, const CLI::App& sub, const Flags& f, std::ostream& out) {
  SynthConfig config;
  if (!f.config.empty()) {
    run.Input(f.config);
    std::ifstream in(f.config);
    std::stringstream buf;
    buf << in.rdbuf();
    config = SynthConfigFromJson(buf.str());
  }
  if (sub.get_option("--seed")->count() > 0) config.seed = f.seed;
  const SynthResult result = Generate(config);
  run.Output(f.out, [&](std::ostream& o) {
    WriteRecordsJsonl(result.dataset.records(), o);
  });
  if (!f.truth.empty()) {
    run.Output(f.truth,
               [&](std::ostream& o) { o << TruthToJson(result.truth) << '\n'; });
  }
  if (!f.scores_out.empty()) {
    run.Output(f.scores_out,
               [&](std::ostream& o) { WriteHumanScoresJsonl(result.human, o); });
  }
  std::vector<std::vector<std::string>> rows = {{"field", "value"}};
  rows.push_back({"records", std::to_string(result.dataset.records().size())});
  rows.push_back({"judges", std::to_string(config.num_judges())});
  rows.push_back({"contexts", std::to_string(config.n_contexts)});
  rows.push_back({"items per context", std::to_string(config.n_items)});
  rows.push_back({"aspects", std::to_string(config.aspects.size())});
  rows.push_back({"seed", std::to_string(config.seed)});
  WriteTextTable(rows, out);
  return 0;
}

int CmdJudge(Run& run, const Flags& f, std::ostream& out) {
  run.Input(f.skeleton);
  run.Input(f.aspects_file);
  HarvestOptions options;
  options.judge_id = f.judge_id;
  options.prompt = PromptTemplate::Named(f.template_spec);
  if (f.template_spec.rfind("file:", 0) == 0) run.Input(f.template_spec.substr(5));
  options.endpoint.base_url = f.base_url;
  options.endpoint.model = f.model_name;
  options.endpoint.api_key_env = f.api_key_env;
  options.endpoint.top_logprobs = f.top_logprobs;
  options.endpoint.timeout_seconds = f.timeout;
  options.both_orders = f.pairs == "both";
  options.max_retries = f.max_retries;
  options.initial_backoff = std::chrono::milliseconds(f.backoff_ms);
  options.concurrency = f.concurrency;
  options.output_path = f.out;
  options.failures_path = f.failures;
  const EndpointConfig endpoint = options.endpoint;
  std::vector<AspectSpec> aspects = ReadAspectsFile(f.aspects_file);
  if (!f.aspects.empty()) {
    const std::set<std::string> keep(f.aspects.begin(), f.aspects.end());
    std::erase_if(aspects,
                  [&](const AspectSpec& a) { return !keep.contains(a.aspect); });
  }
  HarvestSummary summary;
  try {
    summary = Harvest(ReadSkeletonFile(f.skeleton), aspects, options,
                      [&] { return MakeHttpTransport(endpoint); });
  } catch (...) {
    run.ExternalOutput(f.out);
    throw;
  }
  run.ExternalOutput(f.out);
  const std::string failures =
      f.failures.empty() ? f.out + ".failures.jsonl" : f.failures;
  if (summary.failed > 0) run.ExternalOutput(failures);
  std::vector<std::vector<std::string>> rows = {{"field", "value"}};
  rows.push_back({"requested", std::to_string(summary.requested)});
  rows.push_back({"written", std::to_string(summary.written)});
  rows.push_back({"skipped (already present)",
                  std::to_string(summary.skipped_existing)});
  rows.push_back({"failed", std::to_string(summary.failed)});
  WriteTextTable(rows, out);
  return 0;
}

void AddFilters(CLI::App* sub, Flags& f) {
  sub->add_option("--judges", f.judges, "Only use these judges")
      ->delimiter(',');
  sub->add_option("--exclude-judges", f.exclude_judges, "Drop these judges")
      ->delimiter(',');
  sub->add_option("--aspects", f.aspects, "Only use these aspects")
      ->delimiter(',');
}

void AddCommon(CLI::App* sub, Flags& f) {
  sub->add_option("--workers", f.workers, "Worker threads")
      ->check(CLI::PositiveNumber);
  sub->add_option("--seed", f.seed, "Seed for all randomness");
  sub->add_option("--manifest", f.manifest,
                  "Manifest path (default: <output>.manifest.json)");
}

void AddData(CLI::App* sub, Flags& f, bool required) {
  auto* opt = sub->add_option("--data", f.data, "Comparison records (JSONL)");
  if (required) opt->required();
  AddFilters(sub, f);
}

}  // namespace

std::string Sha256Hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(),
                 nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 0xf];
  }
  return hex;
}

std::string Sha256File(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return Sha256Hex(buf.str());
}

int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Aggregate pairwise judge preferences with Bradley-Terry models",
               "jurybt"};
  app.set_version_flag("--version", JURYBT_VERSION);
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  Flags f;

  auto* ingest = app.add_subcommand("ingest", "Validate and summarize records");
  AddData(ingest, f, true);
  ingest->add_option("--scores", f.scores, "Human scores (JSONL)");
  ingest->add_option("--out", f.out, "Summary JSON");
  AddCommon(ingest, f);

  auto* debias = app.add_subcommand("debias", "Symmetrize presentation orders");
  AddData(debias, f, true);
  debias->add_option("--dump", f.out, "Debiased pairs (JSONL)")->required();
  debias->add_flag("--jury", f.jury, "Average across judges first");
  AddCommon(debias, f);

  auto* cycles = app.add_subcommand("cycles", "Cycle inconsistency rates");
  AddData(cycles, f, true);
  cycles->add_option("--out", f.out, "CSV output")->required();
  cycles->add_flag("--jury", f.jury, "Analyze judge-averaged preferences");
  AddCommon(cycles, f);

  auto* fit = app.add_subcommand("fit", "Fit a Bradley-Terry variant");
  AddData(fit, f, true);
  fit->add_option("--variant", f.variant, "Model variant")
      ->check(CLI::IsMember(
          {"hard-bt", "soft-bt", "bt-sigma", "bt-sigma-asp", "hard-bt-sigma"}));
  fit->add_option("--tol", f.tol, "Projected-gradient tolerance");
  fit->add_option("--max-iter", f.max_iter, "Iteration limit");
  fit->add_option("--out", f.out, "Model JSON")->required();
  AddCommon(fit, f);

  auto* calibrate =
      app.add_subcommand("calibrate", "Per-judge temperatures minimizing ECE");
  AddData(calibrate, f, true);
  calibrate->add_option("--scores", f.scores, "Human scores (JSONL)")
      ->required();
  calibrate->add_option("--grid-min", f.grid_min, "Smallest temperature");
  calibrate->add_option("--grid-max", f.grid_max, "Largest temperature");
  calibrate->add_option("--grid-size", f.grid_size, "Grid points");
  calibrate->add_option("--bins", f.bins, "ECE bins")->check(CLI::PositiveNumber);
  calibrate->add_option("--out", f.out, "Temperatures JSON")->required();
  calibrate->add_option("--model-out", f.model_out,
                        "Also fit the annealed jury model here");
  calibrate->add_option("--tol", f.tol, "Fit tolerance");
  calibrate->add_option("--max-iter", f.max_iter, "Fit iteration limit");
  AddCommon(calibrate, f);

  auto* eval = app.add_subcommand("eval", "Rank correlation against humans");
  eval->add_option("--model", f.models,
                   "Model JSON, optionally as label=path (repeatable)");
  AddData(eval, f, false);
  eval->add_option("--temps", f.temps, "Temperatures for a Temp-BT row");
  eval->add_option("--scores", f.scores, "Human scores (JSONL)")->required();
  eval->add_option("--out", f.out, "Report JSON")->required();
  eval->add_option("--table", f.table, "Method table CSV");
  eval->add_option("--scatter", f.scatter, "Reliability scatter CSV");
  eval->add_option("--tol", f.tol, "Fit tolerance for Temp-BT");
  eval->add_option("--max-iter", f.max_iter, "Fit iteration limit for Temp-BT");
  AddCommon(eval, f);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic jury");
  synth->add_option("--config", f.config, "Generator config JSON");
  synth->add_option("--out", f.out, "Records JSONL")->required();
  synth->add_option("--truth", f.truth, "Planted parameters JSON");
  synth->add_option("--scores-out", f.scores_out, "Human scores JSONL");
  AddCommon(synth, f);

  auto* judge = app.add_subcommand("judge", "Harvest preferences from an endpoint");
  judge->add_option("--skeleton", f.skeleton, "Contexts and items (JSONL)")
      ->required();
  judge->add_option("--aspects-file", f.aspects_file, "Aspect list (JSON)")
      ->required();
  judge->add_option("--aspects", f.aspects, "Only harvest these aspects")
      ->delimiter(',');
  judge->add_option("--template", f.template_spec,
                    "summeval, topicalchat or file:<path>");
  judge->add_option("--pairs", f.pairs, "Presentation orders")
      ->check(CLI::IsMember({"both", "one"}));
  judge->add_option("--judge-id", f.judge_id, "Judge name for the records")
      ->required();
  judge->add_option("--base-url", f.base_url, "Endpoint base URL")->required();
  judge->add_option("--model", f.model_name, "Model name")->required();
  judge->add_option("--api-key-env", f.api_key_env,
                    "Environment variable with the credential");
  judge->add_option("--top-logprobs", f.top_logprobs, "Top log-probabilities");
  judge->add_option("--concurrency", f.concurrency, "In-flight requests")
      ->check(CLI::PositiveNumber);
  judge->add_option("--max-retries", f.max_retries, "Retries per request");
  judge->add_option("--backoff-ms", f.backoff_ms, "Initial backoff");
  judge->add_option("--timeout", f.timeout, "Request timeout in seconds");
  judge->add_option("--out", f.out, "Records JSONL (appended)")->required();
  judge->add_option("--failures", f.failures,
                    "Failure log (default: <out>.failures.jsonl)");
  judge->add_option("--manifest", f.manifest, "Manifest path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    const auto subs = app.get_subcommands();
    EmitError(err, subs.empty() ? "" : subs.front()->get_name(), e.what());
    return 2;
  }

  const CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    Run run(*sub, f);
    int status = 0;
    if (name == "ingest") status = CmdIngest(run, f, out);
    else if (name == "debias") status = CmdDebias(run, f, out);
    else if (name == "cycles") status = CmdCycles(run, f, out);
    else if (name == "fit") status = CmdFit(run, f, out);
    else if (name == "calibrate") status = CmdCalibrate(run, f, out);
    else if (name == "eval") status = CmdEval(run, f, out);
    else if (name == "synth") status = CmdSynth(run, *sub, f, out);
    else if (name == "judge") status = CmdJudge(run, f, out);
    run.WriteManifest();
    return status;
  } catch (const std::exception& e) {
    EmitError(err, name, e.what());
    return 1;
  }
}

}  // namespace jurybt
