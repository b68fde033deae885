// Copyright 2026 The advsqli Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Black-box attack loop: MCTS (UCB selection, random expansion, random
// rollout to the step horizon, backpropagation) plus the comparison
// strategies: uniform random assignment, exhaustive candidate enumeration,
// and a score-guided priority queue. One attack session is sequential and
// owns its rng, its generation context, and its verdict cache.

#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "advsqli/detectors.hpp"
#include "advsqli/grammar.hpp"
#include "advsqli/mutation.hpp"
#include "advsqli/payload.hpp"

namespace advsqli {

enum class Strategy { kMcts, kRandom, kExhaustive, kPriorityQueue };
enum class Mode { kWithProbability, kWithoutProbability };

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::kMcts: return "mcts";
    case Strategy::kRandom: return "random";
    case Strategy::kExhaustive: return "exhaustive";
    case Strategy::kPriorityQueue: return "pqueue";
  }
  return "?";
}

inline bool parse_strategy(std::string_view s, Strategy& out) {
  if (s == "mcts") out = Strategy::kMcts;
  else if (s == "random") out = Strategy::kRandom;
  else if (s == "exhaustive") out = Strategy::kExhaustive;
  else if (s == "pqueue") out = Strategy::kPriorityQueue;
  else return false;
  return true;
}

struct AttackConfig {
  int max_steps = 10;          // s
  int budget = 10;             // iterations per step
  double exploration_c = 0.7071;
  int query_cap = 10000;
  Strategy strategy = Strategy::kMcts;
  Mode mode = Mode::kWithoutProbability;
  std::uint64_t seed = 0;
  RequestMethod method = RequestMethod::kGet;
  int candidate_cap = 16;
};

struct AttackOutcome {
  bool success = false;
  bool initially_passed = false;  // FNR short-circuit, reported separately
  std::string final_payload;
  std::uint64_t queries_used = 0;
  std::vector<MutationAction> action_trace;
  std::vector<std::optional<double>> score_trace;
};

struct SearchNode {
  PayloadTree state;
  std::vector<MutationAction> applied;
  double q = 0.0;  // cumulative quality
  int n = 0;       // visit count
  std::vector<std::unique_ptr<SearchNode>> children;
  std::vector<MutationAction> untried;
  SearchNode* parent = nullptr;
};

// argmax over children of Q/N + c*sqrt(2 ln N(v) / N(v')); ties break to
// the lowest child index.
inline SearchNode& ucb_best_child(SearchNode& node, double c) {
  if (node.children.empty()) throw NoChildren("ucb_best_child: no children");
  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    const SearchNode& child = *node.children[i];
    double exploit = child.q / static_cast<double>(child.n);
    double explore =
        c * std::sqrt(2.0 * std::log(static_cast<double>(node.n)) /
                      static_cast<double>(child.n));
    double score = exploit + explore;
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return *node.children[best];
}

// Verdict -> reward. BB w/ prob.: 1 - score; BB w/o prob.: 1 iff passed.
inline double simulate_reward(const Verdict& verdict, Mode mode) {
  if (mode == Mode::kWithProbability && verdict.score.has_value())
    return 1.0 - *verdict.score;
  return verdict.blocked() ? 0.0 : 1.0;
}

// Test instrumentation hooks (unset in production paths).
struct MctsHooks {
  std::function<void(const SearchNode& root, const SearchNode& expanded,
                     double reward)>
      on_backup;
  std::function<void(int step, const SearchNode& root,
                     const std::string& submitted)>
      on_step;
};

namespace detail {

class AttackSession {
 public:
  AttackSession(Detector& detector, const Grammar& grammar,
                const AttackConfig& config)
      : session_(detector),
        grammar_(grammar),
        config_(config),
        ctx_(config.seed ^ 0x9e3779b97f4a7c15ull),
        rng_(config.seed) {}

  bool can_query() const {
    return session_.queries_used() <
           static_cast<std::uint64_t>(config_.query_cap);
  }

  Verdict query_text(const std::string& payload_text) {
    return session_.query_payload(payload_text, config_.method);
  }

  std::uint64_t queries() const { return session_.queries_used(); }
  bool with_probability() const { return session_.with_probability(); }

  std::vector<MutationAction> proposals_for(const PayloadTree& tree) {
    std::vector<MutationAction> all;
    ProposeOptions opts;
    opts.candidate_cap = config_.candidate_cap;
    opts.method = config_.method;
    for (const auto& ref : explore_operable_nodes(tree)) {
      auto actions = propose(tree, ref, grammar_, ctx_, opts);
      all.insert(all.end(), actions.begin(), actions.end());
    }
    return all;
  }

  // One random mutation: a node first, then one of its candidates. Keeps
  // nodes with large candidate pools from dominating the draw.
  std::optional<MutationAction> random_action(const PayloadTree& tree) {
    auto nodes = explore_operable_nodes(tree);
    ProposeOptions opts;
    opts.candidate_cap = config_.candidate_cap;
    opts.method = config_.method;
    while (!nodes.empty()) {
      std::size_t pick = rng_() % nodes.size();
      auto actions = propose(tree, nodes[pick], grammar_, ctx_, opts);
      if (!actions.empty()) return actions[rng_() % actions.size()];
      nodes.erase(nodes.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return std::nullopt;
  }

  // Per-node candidate lists in explore order (random/exhaustive).
  std::vector<std::vector<MutationAction>> per_node_candidates(
      const PayloadTree& tree) {
    std::vector<std::vector<MutationAction>> out;
    ProposeOptions opts;
    opts.candidate_cap = config_.candidate_cap;
    opts.method = config_.method;
    for (const auto& ref : explore_operable_nodes(tree)) {
      auto actions = propose(tree, ref, grammar_, ctx_, opts);
      if (!actions.empty()) out.push_back(std::move(actions));
    }
    return out;
  }

  std::mt19937_64& rng() { return rng_; }
  const AttackConfig& config() const { return config_; }

 private:
  DetectorSession session_;
  const Grammar& grammar_;
  const AttackConfig& config_;
  GenerationContext ctx_;
  std::mt19937_64 rng_;
};

struct RolloutResult {
  Verdict verdict;
  std::string payload_text;
  std::vector<MutationAction> actions;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// MCTS (select / expand / simulate / backpropagate, then advance the root)
// ---------------------------------------------------------------------------

inline AttackOutcome mcts_attack(const RawPayload& payload, Detector& detector,
                                 const Grammar& grammar,
                                 const AttackConfig& config,
                                 const MctsHooks& hooks = {}) {
  detail::AttackSession s(detector, grammar, config);
  AttackOutcome out;
  Verdict initial = s.query_text(payload.text);
  out.final_payload = payload.text;
  out.score_trace.push_back(initial.score);
  if (!initial.blocked()) {
    out.success = true;
    out.initially_passed = true;
    out.queries_used = s.queries();
    return out;
  }

  PayloadTree tree = build_tree(payload);
  auto operable = explore_operable_nodes(tree);
  const int steps = std::min<std::size_t>(config.max_steps, operable.size());

  auto root = std::make_unique<SearchNode>();
  root->state = tree;
  root->untried = s.proposals_for(tree);

  auto expand = [&](SearchNode& node) -> SearchNode* {
    // Random operation, node-first: pick a tree node, then one of its
    // untried replacements.
    std::vector<std::vector<int>> paths;
    for (const auto& a : node.untried)
      if (paths.empty() || paths.back() != a.node_ref.path)
        paths.push_back(a.node_ref.path);
    const std::vector<int>& path = paths[s.rng()() % paths.size()];
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < node.untried.size(); ++i)
      if (node.untried[i].node_ref.path == path) members.push_back(i);
    std::size_t pick = members[s.rng()() % members.size()];
    MutationAction action = node.untried[pick];
    node.untried.erase(node.untried.begin() +
                       static_cast<std::ptrdiff_t>(pick));
    auto child = std::make_unique<SearchNode>();
    child->state = apply(node.state, action);
    child->applied = node.applied;
    child->applied.push_back(action);
    child->untried = s.proposals_for(child->state);
    child->parent = &node;
    node.children.push_back(std::move(child));
    return node.children.back().get();
  };

  auto tree_policy = [&](SearchNode& from) -> SearchNode* {
    SearchNode* node = &from;
    while (true) {
      if (!node->untried.empty()) return expand(*node);
      if (node->children.empty()) return node;  // terminal state
      node = &ucb_best_child(*node, config.exploration_c);
    }
  };

  auto default_policy = [&](SearchNode& node) -> detail::RolloutResult {
    PayloadTree rollout = node.state;
    detail::RolloutResult r;
    r.actions = node.applied;
    // Play the game out to the effective step horizon s.
    int extra = steps - static_cast<int>(node.applied.size());
    for (int k = 0; k < extra; ++k) {
      auto a = s.random_action(rollout);
      if (!a) break;
      rollout = apply(rollout, *a);
      r.actions.push_back(*a);
    }
    r.payload_text = reconstruct(rollout);
    r.verdict = s.query_text(r.payload_text);
    return r;
  };

  for (int step = 1; step <= steps; ++step) {
    for (int j = 0; j < config.budget; ++j) {
      if (!s.can_query()) break;
      SearchNode* expanded = tree_policy(*root);
      detail::RolloutResult r = default_policy(*expanded);
      double reward = simulate_reward(r.verdict, config.mode);
      for (SearchNode* p = expanded; p != nullptr; p = p->parent) {
        p->q += reward;
        p->n += 1;
      }
      if (hooks.on_backup) hooks.on_backup(*root, *expanded, reward);
      if (!r.verdict.blocked()) {  // bypass found during simulation
        out.success = true;
        out.final_payload = r.payload_text;
        out.action_trace = r.actions;
        out.score_trace.push_back(r.verdict.score);
        out.queries_used = s.queries();
        return out;
      }
    }
    if (root->children.empty() || !s.can_query()) break;

    // BestChild for advancement: highest mean quality (c = 0).
    std::size_t best = 0;
    double best_mean = -1.0;
    for (std::size_t i = 0; i < root->children.size(); ++i) {
      const SearchNode& child = *root->children[i];
      double mean = child.n > 0 ? child.q / child.n : 0.0;
      if (mean > best_mean) {
        best_mean = mean;
        best = i;
      }
    }
    std::unique_ptr<SearchNode> next = std::move(root->children[best]);
    next->parent = nullptr;
    root = std::move(next);

    std::string submitted = reconstruct(root->state);
    Verdict v = s.query_text(submitted);
    if (hooks.on_step) hooks.on_step(step, *root, submitted);
    out.score_trace.push_back(v.score);
    out.final_payload = submitted;
    out.action_trace = root->applied;
    if (!v.blocked()) {
      out.success = true;
      out.queries_used = s.queries();
      return out;
    }
  }
  out.queries_used = s.queries();
  return out;
}

// ---------------------------------------------------------------------------
// Random baseline: independent uniform assignment per operable node each
// query, no memory between queries.
// ---------------------------------------------------------------------------

inline AttackOutcome random_attack(const RawPayload& payload,
                                   Detector& detector, const Grammar& grammar,
                                   const AttackConfig& config) {
  detail::AttackSession s(detector, grammar, config);
  AttackOutcome out;
  Verdict initial = s.query_text(payload.text);
  out.final_payload = payload.text;
  out.score_trace.push_back(initial.score);
  if (!initial.blocked()) {
    out.success = true;
    out.initially_passed = true;
    out.queries_used = s.queries();
    return out;
  }

  PayloadTree tree = build_tree(payload);
  auto candidates = s.per_node_candidates(tree);
  if (candidates.empty()) {
    out.queries_used = s.queries();
    return out;
  }
  const std::uint64_t attempt_limit =
      static_cast<std::uint64_t>(config.query_cap) * 8;
  for (std::uint64_t attempt = 0;
       attempt < attempt_limit && s.can_query(); ++attempt) {
    std::vector<MutationAction> picks;
    for (const auto& node_candidates : candidates) {
      std::size_t k = s.rng()() % (node_candidates.size() + 1);
      if (k > 0) picks.push_back(node_candidates[k - 1]);
    }
    if (picks.empty()) continue;
    PayloadTree mutated = apply_assignment(tree, picks);
    std::string text = reconstruct(mutated);
    Verdict v = s.query_text(text);
    if (!v.blocked()) {
      out.success = true;
      out.final_payload = text;
      out.action_trace = picks;
      out.score_trace.push_back(v.score);
      break;
    }
  }
  out.queries_used = s.queries();
  return out;
}

// ---------------------------------------------------------------------------
// Exhaustive baseline: lexicographic cartesian product of per-node
// candidates.
// ---------------------------------------------------------------------------

inline AttackOutcome exhaustive_attack(const RawPayload& payload,
                                       Detector& detector,
                                       const Grammar& grammar,
                                       const AttackConfig& config) {
  detail::AttackSession s(detector, grammar, config);
  AttackOutcome out;
  Verdict initial = s.query_text(payload.text);
  out.final_payload = payload.text;
  out.score_trace.push_back(initial.score);
  if (!initial.blocked()) {
    out.success = true;
    out.initially_passed = true;
    out.queries_used = s.queries();
    return out;
  }

  PayloadTree tree = build_tree(payload);
  auto candidates = s.per_node_candidates(tree);
  if (candidates.empty()) {
    out.queries_used = s.queries();
    return out;
  }
  // Odometer over (|candidates_i| + 1) options per node; option 0 is
  // no-change, so the first combination is the original payload (a cache
  // hit, already counted by the initial verdict).
  std::vector<std::size_t> odo(candidates.size(), 0);
  while (s.can_query()) {
    std::vector<MutationAction> picks;
    for (std::size_t i = 0; i < odo.size(); ++i)
      if (odo[i] > 0) picks.push_back(candidates[i][odo[i] - 1]);
    PayloadTree mutated =
        picks.empty() ? tree : apply_assignment(tree, picks);
    std::string text = reconstruct(mutated);
    Verdict v = s.query_text(text);
    if (!v.blocked()) {
      out.success = true;
      out.final_payload = text;
      out.action_trace = picks;
      out.score_trace.push_back(v.score);
      break;
    }
    // advance odometer (last node varies fastest)
    std::size_t pos = odo.size();
    while (pos > 0) {
      --pos;
      if (++odo[pos] <= candidates[pos].size()) break;
      odo[pos] = 0;
      if (pos == 0) {
        out.queries_used = s.queries();
        return out;  // space exhausted
      }
    }
  }
  out.queries_used = s.queries();
  return out;
}

// ---------------------------------------------------------------------------
// Score-guided priority queue: each round mutates the lowest-scoring
// payload seen so far, one action per mutant.
// ---------------------------------------------------------------------------

inline AttackOutcome priority_queue_attack(const RawPayload& payload,
                                           Detector& detector,
                                           const Grammar& grammar,
                                           const AttackConfig& config) {
  detail::AttackSession s(detector, grammar, config);
  if (config.mode != Mode::kWithProbability || !s.with_probability())
    throw ModeMismatch("priority_queue_attack requires a scoring detector");

  AttackOutcome out;
  Verdict initial = s.query_text(payload.text);
  out.final_payload = payload.text;
  out.score_trace.push_back(initial.score);
  if (!initial.blocked()) {
    out.success = true;
    out.initially_passed = true;
    out.queries_used = s.queries();
    return out;
  }

  struct Entry {
    double score;
    std::uint64_t seq;
    std::string text;
    std::vector<MutationAction> chain;

    bool operator<(const Entry& o) const {
      return score != o.score ? score < o.score : seq < o.seq;
    }
  };
  std::vector<Entry> queue;
  std::set<std::string> seen;
  std::uint64_t seq = 0;
  queue.push_back(
      Entry{initial.score.value_or(1.0), seq++, payload.text, {}});
  seen.insert(payload.text);

  for (int round = 0; round < config.max_steps && !queue.empty(); ++round) {
    std::sort(queue.begin(), queue.end());
    Entry head = queue.front();
    queue.erase(queue.begin());

    RawPayload head_payload;
    head_payload.text = head.text;
    head_payload.id = payload.id;
    PayloadTree tree;
    try {
      tree = build_tree(head_payload);
    } catch (const LexError&) {
      continue;
    }
    auto all = s.proposals_for(tree);
    if (all.empty()) continue;
    for (int j = 0; j < config.budget; ++j) {
      if (!s.can_query()) {
        out.queries_used = s.queries();
        return out;
      }
      const MutationAction& a = all[s.rng()() % all.size()];
      std::string text = reconstruct(apply(tree, a));
      if (!seen.insert(text).second) continue;
      Verdict v = s.query_text(text);
      std::vector<MutationAction> chain = head.chain;
      chain.push_back(a);
      out.score_trace.push_back(v.score);
      if (!v.blocked()) {
        out.success = true;
        out.final_payload = text;
        out.action_trace = chain;
        out.queries_used = s.queries();
        return out;
      }
      queue.push_back(Entry{v.score.value_or(1.0), seq++, text,
                            std::move(chain)});
    }
  }
  out.queries_used = s.queries();
  return out;
}

// Dispatch per configured strategy.
inline AttackOutcome attack(const RawPayload& payload, Detector& detector,
                            const Grammar& grammar,
                            const AttackConfig& config) {
  switch (config.strategy) {
    case Strategy::kMcts:
      return mcts_attack(payload, detector, grammar, config);
    case Strategy::kRandom:
      return random_attack(payload, detector, grammar, config);
    case Strategy::kExhaustive:
      return exhaustive_attack(payload, detector, grammar, config);
    case Strategy::kPriorityQueue:
      return priority_queue_attack(payload, detector, grammar, config);
  }
  return {};
}

}  // namespace advsqli
