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

#ifndef JURYBT_JUDGE_CLIENT_H_
#define JURYBT_JUDGE_CLIENT_H_

// Harvests pairwise preference probabilities from a chat-completion endpoint
// that returns next-token log-probabilities. Each ordered pair is rendered
// into a prompt asking for the letter of the better candidate; the
// probability that the first candidate wins is the two-way softmax over the
// log-probabilities of the two answer tokens.

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "jurybt/core.h"

namespace jurybt {

struct PromptTemplate {
  std::string text;
  std::string token_first = "A";
  std::string token_second = "B";
  // Additional spellings matched exactly (case-sensitive), e.g. " A".
  std::vector<std::string> aliases_first = {" A"};
  std::vector<std::string> aliases_second = {" B"};

  static PromptTemplate SummEval();
  static PromptTemplate TopicalChat();
  // "summeval", "topicalchat" or "file:<path>" (plain-text template).
  static PromptTemplate Named(const std::string& spec);

  // Throws Error when a required placeholder ({text}, {passage_i},
  // {passage_j}, {metric}) is missing or the answer tokens coincide.
  void Validate() const;
  bool NeedsDescription() const;

  // Substitutes placeholders in one pass; substituted text is not rescanned.
  std::string Render(const std::string& context_text,
                     const std::string& passage_i,
                     const std::string& passage_j, const std::string& metric,
                     const std::string& metric_description = "") const;
};

// exp(la) / (exp(la) + exp(lb)).
double TwoWaySoftmax(double logprob_first, double logprob_second);

struct AnswerLogprobs {
  double first = 0.0;
  double second = 0.0;
};

// Finds the answer tokens among the top log-probabilities of the first
// generated token. Aliases of one answer are pooled by log-sum-exp. Returns
// nullopt when either answer is absent. Accepts the chat format
// (choices[0].logprobs.content[0].top_logprobs = [{token, logprob}]) and the
// legacy completion format (choices[0].logprobs.top_logprobs[0] = {token:
// logprob}). Throws Error on an unrecognized body.
std::optional<AnswerLogprobs> ExtractAnswerLogprobs(
    const std::string& response_body, const PromptTemplate& tmpl);

// Transport failure; always retried by the harvester.
class TransportError : public Error {
 public:
  using Error::Error;
};

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  // Posts a JSON request body and returns the response body. Throws
  // TransportError on network failure or a non-2xx status.
  virtual std::string Post(const std::string& body) = 0;
};

struct EndpointConfig {
  // e.g. "http://localhost:8000/v1"; requests go to <base_url>/chat/completions.
  std::string base_url;
  std::string model;
  // Environment variable holding the bearer credential (may be unset).
  std::string api_key_env = "JURYBT_API_KEY";
  int top_logprobs = 20;
  int timeout_seconds = 60;
};

// cpp-httplib transport; supports http and https.
std::unique_ptr<ChatTransport> MakeHttpTransport(const EndpointConfig& config);

// Chat-completion request for one rendered prompt: a single user message,
// one generated token at temperature 0 with top log-probabilities.
std::string BuildChatRequest(const EndpointConfig& config,
                             const std::string& prompt);

struct SkeletonContext {
  std::string context;
  std::string text;
  std::vector<std::pair<std::string, std::string>> items;  // id -> passage
};

struct AspectSpec {
  std::string aspect;  // id written to records
  std::string metric;  // word substituted for {metric}
  std::string description;
};

// JSONL, one context per line: {"context", "text", "items": {id: passage}}.
std::vector<SkeletonContext> ReadSkeletonFile(const std::string& path);
// JSON array of {"aspect", "metric", "description"}.
std::vector<AspectSpec> ReadAspectsFile(const std::string& path);

struct JudgeCallResult {
  std::string item_first;
  std::string item_second;
  AnswerLogprobs logprobs;
  double prob_first_wins = 0.5;
  double latency_ms = 0.0;
  int retries = 0;
};

struct HarvestOptions {
  std::string judge_id;
  PromptTemplate prompt = PromptTemplate::SummEval();
  EndpointConfig endpoint;
  // Request both presentation orders of every pair (otherwise only the
  // lexicographically ordered one).
  bool both_orders = true;
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  int concurrency = 4;
  std::string output_path;
  std::string failures_path;  // empty: "<output_path>.failures.jsonl"
};

struct HarvestSummary {
  int requested = 0;
  int written = 0;
  int skipped_existing = 0;
  int failed = 0;
};

// Appends one record per harvested ordered pair to options.output_path,
// skipping pairs already present there. Pairs whose answer tokens never
// appear are logged to the failures file. Transport failures are retried
// with exponential backoff; when retries run out the harvest stops, keeps
// everything written so far and throws Error. `make_transport` is called
// once per worker.
HarvestSummary Harvest(
    const std::vector<SkeletonContext>& skeleton,
    const std::vector<AspectSpec>& aspects, const HarvestOptions& options,
    const std::function<std::unique_ptr<ChatTransport>()>& make_transport);

}  // namespace jurybt

#endif  // JURYBT_JUDGE_CLIENT_H_
