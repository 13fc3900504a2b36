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

#include "jurybt/judge_client.h"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "httplib.h"
#include "json.hpp"
#include "jurybt/models.h"

namespace jurybt {
namespace {

constexpr const char* kRequiredPlaceholders[] = {"{text}", "{passage_i}",
                                                 "{passage_j}", "{metric}"};

double LogSumExp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Pools the log-probabilities of every spelling in `names`.
std::optional<double> PoolTokens(
    const std::vector<std::pair<std::string, double>>& top,
    const std::string& token, const std::vector<std::string>& aliases) {
  std::optional<double> pooled;
  for (const auto& [t, lp] : top) {
    bool match = t == token;
    for (const std::string& alias : aliases) match = match || t == alias;
    if (!match || !std::isfinite(lp)) continue;
    pooled = pooled ? LogSumExp(*pooled, lp) : lp;
  }
  return pooled;
}

class HttpTransport : public ChatTransport {
 public:
  HttpTransport(const EndpointConfig& config) {
    const std::string& url = config.base_url;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
      throw Error("endpoint base URL needs a scheme: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string origin =
        path_start == std::string::npos ? url : url.substr(0, path_start);
    std::string prefix =
        path_start == std::string::npos ? "" : url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    path_ = prefix + "/chat/completions";
    client_ = std::make_unique<httplib::Client>(origin);
    if (!client_->is_valid()) throw Error("invalid endpoint URL: " + url);
    client_->set_connection_timeout(config.timeout_seconds, 0);
    client_->set_read_timeout(config.timeout_seconds, 0);
    if (const char* key = std::getenv(config.api_key_env.c_str());
        key != nullptr && *key != '\0') {
      client_->set_bearer_token_auth(key);
    }
  }

  std::string Post(const std::string& body) override {
    auto res = client_->Post(path_, body, "application/json");
    if (!res) {
      throw TransportError("request failed: " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
      throw TransportError("endpoint returned HTTP " +
                           std::to_string(res->status));
    }
    return res->body;
  }

 private:
  std::unique_ptr<httplib::Client> client_;
  std::string path_;
};

using PairKey =
    std::tuple<std::string, std::string, std::string, std::string, std::string>;

PairKey KeyOf(const ComparisonRecord& r) {
  return {r.judge, r.context, r.aspect, r.item_first, r.item_second};
}

}  // namespace

PromptTemplate PromptTemplate::SummEval() {
  PromptTemplate t;
  t.text =
      "Article:\n{text}\n\n"
      "Summary A:\n{passage_i}\n\n"
      "Summary B:\n{passage_j}\n\n"
      "Which Summary is more {metric}? Output the letter A or B directly.\n\n"
      "Your output:";
  return t;
}

PromptTemplate PromptTemplate::TopicalChat() {
  PromptTemplate t;
  t.text =
      "Context:\n{text}\n\n"
      "Response A:\n{passage_i}\n\n"
      "Response B:\n{passage_j}\n\n"
      "Definition of {metric}: {metric_description}\n\n"
      "Which response is more {metric}? Output the letter A or B directly.\n\n"
      "Your output:";
  return t;
}

PromptTemplate PromptTemplate::Named(const std::string& spec) {
  if (spec == "summeval") return SummEval();
  if (spec == "topicalchat") return TopicalChat();
  if (spec.rfind("file:", 0) == 0) {
    const std::string path = spec.substr(5);
    std::ifstream in(path);
    if (!in) throw Error("cannot open template file " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    PromptTemplate t;
    t.text = buffer.str();
    t.Validate();
    return t;
  }
  throw Error("unknown template: " + spec);
}

void PromptTemplate::Validate() const {
  for (const char* placeholder : kRequiredPlaceholders) {
    if (text.find(placeholder) == std::string::npos) {
      throw Error(std::string("template is missing placeholder ") + placeholder);
    }
  }
  if (token_first.empty() || token_second.empty() ||
      token_first == token_second) {
    throw Error("answer tokens must be non-empty and distinct");
  }
}

bool PromptTemplate::NeedsDescription() const {
  return text.find("{metric_description}") != std::string::npos;
}

std::string PromptTemplate::Render(const std::string& context_text,
                                   const std::string& passage_i,
                                   const std::string& passage_j,
                                   const std::string& metric,
                                   const std::string& metric_description) const {
  const std::pair<const char*, const std::string*> substitutions[] = {
      {"{text}", &context_text},
      {"{passage_i}", &passage_i},
      {"{passage_j}", &passage_j},
      {"{metric_description}", &metric_description},
      {"{metric}", &metric},
  };
  std::string out;
  out.reserve(text.size() + context_text.size() + passage_i.size() +
              passage_j.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    if (text[pos] == '{') {
      bool replaced = false;
      for (const auto& [name, value] : substitutions) {
        if (text.compare(pos, std::strlen(name), name) == 0) {
          out += *value;
          pos += std::strlen(name);
          replaced = true;
          break;
        }
      }
      if (replaced) continue;
    }
    out += text[pos++];
  }
  return out;
}

double TwoWaySoftmax(double logprob_first, double logprob_second) {
  return Logistic(logprob_first - logprob_second);
}

std::optional<AnswerLogprobs> ExtractAnswerLogprobs(
    const std::string& response_body, const PromptTemplate& tmpl) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(response_body);
  } catch (const nlohmann::json::exception&) {
    throw Error("endpoint response is not JSON");
  }
  std::vector<std::pair<std::string, double>> top;
  try {
    const auto& logprobs = j.at("choices").at(0).at("logprobs");
    if (logprobs.contains("content")) {
      for (const auto& entry : logprobs.at("content").at(0).at("top_logprobs")) {
        top.emplace_back(entry.at("token").get<std::string>(),
                         entry.at("logprob").get<double>());
      }
    } else {
      for (const auto& [token, lp] :
           logprobs.at("top_logprobs").at(0).items()) {
        top.emplace_back(token, lp.get<double>());
      }
    }
  } catch (const nlohmann::json::exception&) {
    throw Error("endpoint response carries no top log-probabilities");
  }
  auto first = PoolTokens(top, tmpl.token_first, tmpl.aliases_first);
  auto second = PoolTokens(top, tmpl.token_second, tmpl.aliases_second);
  if (!first || !second) return std::nullopt;
  return AnswerLogprobs{*first, *second};
}

std::unique_ptr<ChatTransport> MakeHttpTransport(const EndpointConfig& config) {
  return std::make_unique<HttpTransport>(config);
}

std::string BuildChatRequest(const EndpointConfig& config,
                             const std::string& prompt) {
  nlohmann::ordered_json j;
  j["model"] = config.model;
  j["messages"] = nlohmann::ordered_json::array(
      {{{"role", "user"}, {"content", prompt}}});
  j["max_tokens"] = 1;
  j["temperature"] = 0;
  j["logprobs"] = true;
  j["top_logprobs"] = config.top_logprobs;
  return j.dump();
}

std::vector<SkeletonContext> ReadSkeletonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<SkeletonContext> contexts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      SkeletonContext c;
      c.context = j.at("context").get<std::string>();
      c.text = j.value("text", "");
      for (const auto& [id, passage] : j.at("items").items()) {
        c.items.emplace_back(id, passage.get<std::string>());
      }
      if (c.items.size() < 2) {
        throw Error("context " + c.context + " needs at least two items");
      }
      contexts.push_back(std::move(c));
    } catch (const nlohmann::json::exception&) {
      throw Error(path + " line " + std::to_string(line_no) +
                  ": malformed skeleton entry");
    }
  }
  return contexts;
}

std::vector<AspectSpec> ReadAspectsFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<AspectSpec> aspects;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    for (const auto& entry : j) {
      AspectSpec a;
      a.aspect = entry.at("aspect").get<std::string>();
      a.metric = entry.value("metric", a.aspect);
      a.description = entry.value("description", "");
      aspects.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception&) {
    throw Error("malformed aspects file " + path);
  }
  if (aspects.empty()) throw Error("aspects file lists no aspects");
  return aspects;
}

HarvestSummary Harvest(
    const std::vector<SkeletonContext>& skeleton,
    const std::vector<AspectSpec>& aspects, const HarvestOptions& options,
    const std::function<std::unique_ptr<ChatTransport>()>& make_transport) {
  options.prompt.Validate();
  if (options.judge_id.empty()) throw Error("judge id is required");
  if (options.output_path.empty()) throw Error("output path is required");
  if (options.prompt.NeedsDescription()) {
    for (const AspectSpec& a : aspects) {
      if (a.description.empty()) {
        throw Error("template needs a metric description for aspect " +
                    a.aspect);
      }
    }
  }

  std::set<PairKey> existing;
  if (std::filesystem::exists(options.output_path)) {
    for (const ComparisonRecord& r : ReadRecordsFile(options.output_path)) {
      existing.insert(KeyOf(r));
    }
  }

  struct Task {
    const SkeletonContext* context;
    const AspectSpec* aspect;
    std::size_t first;
    std::size_t second;
  };
  HarvestSummary summary;
  std::vector<Task> tasks;
  for (const SkeletonContext& c : skeleton) {
    for (const AspectSpec& a : aspects) {
      for (std::size_t i = 0; i < c.items.size(); ++i) {
        for (std::size_t j = 0; j < c.items.size(); ++j) {
          if (i == j) continue;
          if (!options.both_orders && !(c.items[i].first < c.items[j].first)) {
            continue;
          }
          ComparisonRecord probe{c.context, a.aspect, options.judge_id,
                                 c.items[i].first, c.items[j].first, 0.0};
          if (existing.contains(KeyOf(probe))) {
            ++summary.skipped_existing;
            continue;
          }
          tasks.push_back({&c, &a, i, j});
        }
      }
    }
  }
  summary.requested = static_cast<int>(tasks.size());

  std::ofstream out(options.output_path, std::ios::app);
  if (!out) throw Error("cannot open " + options.output_path + " for append");
  const std::string failures_path = options.failures_path.empty()
                                        ? options.output_path + ".failures.jsonl"
                                        : options.failures_path;
  std::ofstream failures;

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::string fatal;

  auto worker = [&] {
    std::unique_ptr<ChatTransport> transport = make_transport();
    for (;;) {
      if (abort.load()) return;
      const std::size_t t = next.fetch_add(1);
      if (t >= tasks.size()) return;
      const Task& task = tasks[t];
      const auto& [id_i, passage_i] = task.context->items[task.first];
      const auto& [id_j, passage_j] = task.context->items[task.second];
      const std::string body = BuildChatRequest(
          options.endpoint,
          options.prompt.Render(task.context->text, passage_i, passage_j,
                                task.aspect->metric, task.aspect->description));
      int transport_failures = 0;
      int extraction_failures = 0;
      std::optional<AnswerLogprobs> answer;
      std::string failure_reason;
      for (;;) {
        std::string response;
        try {
          response = transport->Post(body);
        } catch (const TransportError& e) {
          if (++transport_failures > options.max_retries) {
            std::lock_guard<std::mutex> lock(mu);
            if (fatal.empty()) fatal = e.what();
            abort.store(true);
            return;
          }
          std::this_thread::sleep_for(options.initial_backoff *
                                      (1 << (transport_failures - 1)));
          continue;
        }
        try {
          answer = ExtractAnswerLogprobs(response, options.prompt);
          failure_reason = "answer tokens not in top log-probabilities";
        } catch (const Error& e) {
          failure_reason = e.what();
        }
        if (answer || ++extraction_failures > options.max_retries) break;
      }
      std::lock_guard<std::mutex> lock(mu);
      if (!answer) {
        if (!failures.is_open()) failures.open(failures_path, std::ios::app);
        nlohmann::ordered_json f;
        f["context"] = task.context->context;
        f["aspect"] = task.aspect->aspect;
        f["judge"] = options.judge_id;
        f["item_first"] = id_i;
        f["item_second"] = id_j;
        f["reason"] = failure_reason;
        failures << f.dump() << '\n' << std::flush;
        ++summary.failed;
        continue;
      }
      ComparisonRecord record{task.context->context, task.aspect->aspect,
                              options.judge_id, id_i, id_j,
                              TwoWaySoftmax(answer->first, answer->second)};
      out << RecordToJsonLine(record) << '\n' << std::flush;
      ++summary.written;
    }
  };

  const int n_workers = std::max(1, options.concurrency);
  std::vector<std::thread> threads;
  std::exception_ptr first_error;
  auto guarded = [&] {
    try {
      worker();
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (!first_error) first_error = std::current_exception();
      abort.store(true);
    }
  };
  for (int w = 1; w < n_workers; ++w) threads.emplace_back(guarded);
  guarded();
  for (std::thread& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
  if (!fatal.empty()) {
    throw Error("harvest aborted after " + std::to_string(summary.written) +
                " records: " + fatal);
  }
  return summary;
}

}  // namespace jurybt
