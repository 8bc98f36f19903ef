#include "ductsr/sr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <json.hpp>

namespace ductsr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

void SrConfig::validate() const {
  if (max_size < 1) throw Error("max_size must be at least 1");
  if (n_iterations < 0) throw Error("n_iterations must be non-negative");
  if (population_size < 2 || tournament_size < 2 || tournament_size > population_size)
    throw Error("population_size >= tournament_size >= 2 is required");
  if (p_crossover < 0.0 || p_mutation < 0.0 || p_crossover + p_mutation > 1.0 + 1e-12)
    throw Error("p_crossover and p_mutation must be probabilities with sum <= 1");
  if (constant_optimizer_steps < 0 || frontier_polish_steps < 0)
    throw Error("optimizer step counts must be non-negative");
  if (cycles_per_iteration < 1) throw Error("cycles_per_iteration must be at least 1");
  if (p_optimize < 0.0 || p_optimize > 1.0) throw Error("p_optimize must be a probability");
  if (!(constant_min < constant_max)) throw Error("constant range is empty");
}

RegressionData RegressionData::from_records(std::span<const FlowRecord> records, Target t) {
  RegressionData d;
  d.x.reserve(records.size());
  d.y.reserve(records.size());
  d.z.reserve(records.size());
  d.re.reserve(records.size());
  d.target.reserve(records.size());
  for (const FlowRecord& r : records) {
    d.x.push_back(r.x);
    d.y.push_back(r.y);
    d.z.push_back(r.z);
    d.re.push_back(r.re);
    d.target.push_back(t == Target::U ? r.u : r.p);
  }
  return d;
}

RegressionData RegressionData::subsample(std::size_t max_points) const {
  if (max_points == 0) throw Error("subsample requires max_points >= 1");
  const std::size_t n = size();
  if (n <= max_points) return *this;
  const std::size_t stride = (n + max_points - 1) / max_points;
  RegressionData d;
  for (std::size_t i = 0; i < n; i += stride) {
    d.x.push_back(x[i]);
    d.y.push_back(y[i]);
    d.z.push_back(z[i]);
    d.re.push_back(re[i]);
    d.target.push_back(target[i]);
  }
  return d;
}

double mse_loss(const Expr& e, const RegressionData& data) {
  const std::size_t n = data.size();
  if (n == 0) throw Error("loss requires a non-empty dataset");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = evaluate(e, data.point(i));
    if (std::isnan(v)) return kInf;
    const double r = v - data.target[i];
    sum += r * r;
  }
  const double loss = sum / static_cast<double>(n);
  return std::isfinite(loss) ? loss : kInf;
}

bool ParetoFrontier::admissible(int complexity, double loss) const {
  for (const ParetoEntry& e : entries_) {
    if (e.complexity > complexity) break;  // sorted; nothing later can dominate
    if (e.loss <= loss && (e.complexity < complexity || e.loss < loss)) return false;
  }
  return true;
}

bool ParetoFrontier::update(ParetoEntry candidate) {
  if (!std::isfinite(candidate.loss)) throw Error("Pareto candidates must have finite loss");
  for (const ParetoEntry& e : entries_) {
    if (e.complexity <= candidate.complexity && e.loss <= candidate.loss) {
      if (e.complexity < candidate.complexity || e.loss < candidate.loss) return false;
      // exact coordinate tie: the lexicographically smaller printed form stays
      if (format_expression(e.expression) <= format_expression(candidate.expression))
        return false;
      break;
    }
  }
  std::erase_if(entries_, [&](const ParetoEntry& e) {
    if (candidate.complexity <= e.complexity && candidate.loss <= e.loss) {
      if (candidate.complexity < e.complexity || candidate.loss < e.loss) return true;
      return format_expression(candidate.expression) < format_expression(e.expression);
    }
    return false;
  });
  auto pos = std::lower_bound(entries_.begin(), entries_.end(), candidate,
                              [](const ParetoEntry& a, const ParetoEntry& b) {
                                return a.complexity < b.complexity;
                              });
  entries_.insert(pos, std::move(candidate));
  return true;
}

double ParetoFrontier::best_loss() const {
  return entries_.empty() ? kInf : entries_.back().loss;
}

void ParetoFrontier::assign_ids() {
  for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i].id = static_cast<int>(i);
}

namespace {

Expr random_leaf(const SrConfig& config, Rng& rng) {
  switch (rng.uniform_int(0, 4)) {
    case 0: return variable(Var::X);
    case 1: return variable(Var::Y);
    case 2: return variable(Var::Z);
    case 3: return variable(Var::Re);
    default: return constant(rng.uniform(config.constant_min, config.constant_max));
  }
}

BinOp random_bin_op(Rng& rng) {
  switch (rng.uniform_int(0, 3)) {
    case 0: return BinOp::Add;
    case 1: return BinOp::Sub;
    case 2: return BinOp::Mul;
    default: return BinOp::Div;
  }
}

UnOp random_un_op(Rng& rng) { return rng.chance(0.5) ? UnOp::Square : UnOp::Cube; }

Expr grow(const SrConfig& config, Rng& rng, int budget, bool allow_unary) {
  if (budget <= 1) return random_leaf(config, rng);
  // weight interior nodes so trees actually use their budget
  double w_leaf = 1.0;
  double w_unary = allow_unary ? 1.0 : 0.0;
  double w_binary = budget >= 3 ? 3.0 : 0.0;
  const double pick = rng.uniform(0.0, w_leaf + w_unary + w_binary);
  if (pick < w_leaf) return random_leaf(config, rng);
  if (pick < w_leaf + w_unary) return unary(random_un_op(rng), grow(config, rng, budget - 1, false));
  const int left_budget = rng.uniform_int(1, budget - 2);
  const int right_budget = budget - 1 - left_budget;
  Expr l = grow(config, rng, left_budget, true);
  Expr r = grow(config, rng, right_budget, true);
  return binary(random_bin_op(rng), l, r);
}

/// Subtree rooted at the given preorder index (root is 0).
Expr subtree_at(const Expr& e, std::uint32_t index) {
  if (index == 0) return e;
  index -= 1;
  if (e.is_unary()) return subtree_at(e.child(), index);
  const std::uint32_t left_size = e.left().size();
  if (index < left_size) return subtree_at(e.left(), index);
  return subtree_at(e.right(), index - left_size);
}

/// New tree with the subtree at the preorder index replaced.
Expr replace_at(const Expr& e, std::uint32_t index, const Expr& replacement) {
  if (index == 0) return replacement;
  index -= 1;
  if (e.is_unary()) return unary(e.unary_op(), replace_at(e.child(), index, replacement));
  const std::uint32_t left_size = e.left().size();
  if (index < left_size)
    return binary(e.binary_op(), replace_at(e.left(), index, replacement), e.right());
  return binary(e.binary_op(), e.left(), replace_at(e.right(), index - left_size, replacement));
}

bool valid_candidate(const Expr& e, const SrConfig& config) {
  return e && e.size() <= static_cast<std::uint32_t>(config.max_size) && !e.has_nested_unary();
}

void collect_operator_indices(const Expr& e, std::uint32_t base, std::vector<std::uint32_t>& out) {
  if (e.is_unary()) {
    out.push_back(base);
    collect_operator_indices(e.child(), base + 1, out);
  } else if (e.is_binary()) {
    out.push_back(base);
    collect_operator_indices(e.left(), base + 1, out);
    collect_operator_indices(e.right(), base + 1 + e.left().size(), out);
  }
}

}  // namespace

Expr random_expression(const SrConfig& config, Rng& rng, int size_budget) {
  if (size_budget < 1) throw Error("size budget must be at least 1");
  const int budget = std::min(size_budget, config.max_size);
  return grow(config, rng, budget, true);
}

Expr mutate(const Expr& e, const SrConfig& config, Rng& rng) {
  const MutationWeights& w = config.mutation;
  const double total = w.total();
  if (total <= 0.0) return e;

  for (int attempt = 0; attempt < 16; ++attempt) {
    double pick = rng.uniform(0.0, total);
    Expr candidate;
    if ((pick -= w.replace_subtree) < 0.0) {
      const std::uint32_t idx = static_cast<std::uint32_t>(rng.index(e.size()));
      const Expr victim = subtree_at(e, idx);
      const int room = config.max_size - static_cast<int>(e.size() - victim.size());
      if (room < 1) continue;
      const int cap = std::min(room, static_cast<int>(victim.size()) + 4);
      const Expr repl = grow(config, rng, rng.uniform_int(1, std::max(1, cap)), true);
      candidate = replace_at(e, idx, repl);
    } else if ((pick -= w.perturb_constant) < 0.0) {
      std::vector<double> consts = constants_of(e);
      if (consts.empty()) continue;
      const std::size_t i = rng.index(consts.size());
      const double factor = std::exp(0.4 * rng.normal());
      consts[i] *= factor;
      if (!std::isfinite(consts[i])) continue;
      candidate = with_constants(e, consts);
    } else if ((pick -= w.change_operator) < 0.0) {
      std::vector<std::uint32_t> ops;
      collect_operator_indices(e, 0, ops);
      if (ops.empty()) continue;
      const std::uint32_t idx = ops[rng.index(ops.size())];
      const Expr node = subtree_at(e, idx);
      Expr changed;
      if (node.is_unary()) {
        changed = unary(node.unary_op() == UnOp::Square ? UnOp::Cube : UnOp::Square, node.child());
      } else {
        BinOp op = random_bin_op(rng);
        while (op == node.binary_op()) op = random_bin_op(rng);
        changed = binary(op, node.left(), node.right());
      }
      candidate = replace_at(e, idx, changed);
    } else if ((pick -= w.insert_node) < 0.0) {
      const std::uint32_t idx = static_cast<std::uint32_t>(rng.index(e.size()));
      const Expr node = subtree_at(e, idx);
      Expr wrapped;
      if (rng.chance(0.25) && !node.is_unary()) {
        wrapped = unary(random_un_op(rng), node);
      } else {
        const Expr leaf = random_leaf(config, rng);
        wrapped = rng.chance(0.5) ? binary(random_bin_op(rng), node, leaf)
                                  : binary(random_bin_op(rng), leaf, node);
      }
      candidate = replace_at(e, idx, wrapped);
    } else {
      std::vector<std::uint32_t> ops;
      collect_operator_indices(e, 0, ops);
      if (ops.empty()) continue;
      const std::uint32_t idx = ops[rng.index(ops.size())];
      const Expr node = subtree_at(e, idx);
      const Expr kept = node.is_binary() ? (rng.chance(0.5) ? node.left() : node.right())
                                         : node.child();
      candidate = replace_at(e, idx, kept);
    }
    if (valid_candidate(candidate, config)) return candidate;
  }
  return e;
}

Expr crossover(const Expr& a, const Expr& b, const SrConfig& config, Rng& rng) {
  for (int attempt = 0; attempt < 16; ++attempt) {
    const std::uint32_t target = static_cast<std::uint32_t>(rng.index(a.size()));
    const Expr graft = subtree_at(b, static_cast<std::uint32_t>(rng.index(b.size())));
    Expr candidate = replace_at(a, target, graft);
    if (valid_candidate(candidate, config)) return candidate;
  }
  return a;
}

Expr optimize_constants(const Expr& e, const RegressionData& data, int steps, Rng& rng) {
  std::vector<double> values = constants_of(e);
  if (values.empty() || steps <= 0) return e;

  double best_loss = mse_loss(e, data);
  if (!std::isfinite(best_loss)) return e;

  const std::size_t n = values.size();
  std::vector<double> scale(n, 0.25);  // per-constant proposal scale, self-tuning
  std::vector<double> trial = values;
  for (int s = 0; s < steps; ++s) {
    const std::size_t i = static_cast<std::size_t>(s) % n;
    trial = values;
    const double v = values[i];
    // adaptive steps home in on the current basin; every third proposal jumps
    // at a log-uniform scale so a badly scaled start can still escape
    const double sigma =
        (s % 3 == 2) ? std::pow(10.0, rng.uniform(-3.0, 0.7)) : scale[i];
    const double proposed = rng.chance(0.5)
                                ? v * std::exp(sigma * rng.normal())
                                : v + sigma * (std::fabs(v) + 1.0) * rng.normal();
    if (!std::isfinite(proposed)) continue;
    trial[i] = proposed;
    const double loss = mse_loss(with_constants(e, trial), data);
    if (loss < best_loss) {
      best_loss = loss;
      values[i] = proposed;
      scale[i] = std::min(std::max(scale[i], std::fabs(sigma)) * 2.0, 4.0);
    } else if (s % 3 != 2) {
      scale[i] = std::max(scale[i] * 0.5, 1e-14);
    }
  }
  return with_constants(e, values);
}

namespace {

struct Individual {
  Expr expr;
  double loss = kInf;
  std::uint32_t complexity = 0;
};

}  // namespace

ParetoFrontier evolve(const SrConfig& config, const RegressionData& data) {
  config.validate();
  if (data.size() == 0) throw Error("evolve requires non-empty training data");

  Rng rng(config.rng_seed);
  ParetoFrontier frontier;

  // Evaluates and archives a candidate. Constants are hill-climbed when the
  // candidate would extend the frontier, and for a random slice of everything
  // else: promising shapes usually arrive with poor constants, and without
  // tuning they would die before reaching the archive. Lamarckian: the tuned
  // tree goes back into the population.
  auto admit = [&](Expr e) -> Individual {
    Individual ind;
    ind.complexity = e.size();
    ind.loss = mse_loss(e, data);
    ind.expr = std::move(e);
    if (std::isfinite(ind.loss)) {
      const bool extends = frontier.admissible(static_cast<int>(ind.complexity), ind.loss);
      if (extends || rng.chance(config.p_optimize)) {
        Expr tuned = optimize_constants(ind.expr, data, config.constant_optimizer_steps, rng);
        const double tuned_loss = mse_loss(tuned, data);
        if (tuned_loss <= ind.loss) {
          ind.expr = tuned;
          ind.loss = tuned_loss;
        }
      }
      if (std::isfinite(ind.loss) &&
          frontier.admissible(static_cast<int>(ind.complexity), ind.loss))
        frontier.update(ParetoEntry{0, static_cast<int>(ind.complexity), ind.loss, ind.expr});
    }
    return ind;
  };

  std::vector<Individual> pop;
  pop.reserve(config.population_size);
  for (int i = 0; i < config.population_size; ++i)
    pop.push_back(admit(random_expression(config, rng, rng.uniform_int(1, config.max_size))));

  // tournament with geometric win probability: mostly the best of the
  // sample, sometimes a runner-up, which keeps the gene pool from collapsing
  std::vector<std::size_t> picks(config.tournament_size);
  auto tournament = [&]() -> const Individual& {
    for (int t = 0; t < config.tournament_size; ++t) picks[t] = rng.index(pop.size());
    std::sort(picks.begin(), picks.end(), [&](std::size_t a, std::size_t b) {
      const Individual& ia = pop[a];
      const Individual& ib = pop[b];
      if (ia.loss != ib.loss) return ia.loss < ib.loss;
      if (ia.complexity != ib.complexity) return ia.complexity < ib.complexity;
      return a < b;
    });
    for (int t = 0; t + 1 < config.tournament_size; ++t)
      if (rng.chance(0.9)) return pop[picks[t]];
    return pop[picks[config.tournament_size - 1]];
  };

  // draws a crossover parent from the archive part of the time, so proven
  // building blocks of different complexities recombine directly
  auto breeding_parent = [&]() -> const Expr& {
    if (!frontier.empty() && rng.chance(0.25))
      return frontier.entries()[rng.index(frontier.size())].expression;
    return tournament().expr;
  };

  // steady state: children overwrite the oldest slot, so a novel shape gets a
  // full population lifetime before it must win tournaments
  std::size_t ring = 0;
  for (int gen = 0; gen < config.n_iterations; ++gen) {
    // keep frontier genes in the breeding pool
    for (const ParetoEntry& entry : frontier.entries()) {
      for (int copies = 0; copies < 2; ++copies) {
        const std::size_t slot = rng.index(pop.size());
        pop[slot] = Individual{entry.expression, entry.loss,
                               static_cast<std::uint32_t>(entry.complexity)};
      }
    }
    // periodic partial restart: half the pool turns over while the archive
    // keeps everything learned so far
    if (gen > 0 && gen % 25 == 0) {
      for (std::size_t slot = 0; slot < pop.size(); slot += 2)
        pop[slot] = admit(random_expression(config, rng, rng.uniform_int(1, config.max_size)));
    }
    const int steps = config.population_size * config.cycles_per_iteration;
    for (int step = 0; step < steps; ++step) {
      Expr child;
      if (rng.chance(0.02)) {
        child = random_expression(config, rng, rng.uniform_int(1, config.max_size));
      } else {
        const double r = rng.uniform01();
        if (r < config.p_crossover) {
          const Expr& lhs = breeding_parent();
          const Expr& rhs = breeding_parent();
          child = crossover(lhs, rhs, config, rng);
        } else if (r < config.p_crossover + config.p_mutation) {
          child = mutate(tournament().expr, config, rng);
        } else {
          child = tournament().expr;
        }
      }
      pop[ring] = admit(std::move(child));
      ring = (ring + 1) % pop.size();
    }
    // rolling refinement of one archived entry per generation
    if (!frontier.empty()) {
      const ParetoEntry entry = frontier.entries()[rng.index(frontier.size())];
      Expr tuned = optimize_constants(entry.expression, data, 400, rng);
      const double loss = mse_loss(tuned, data);
      if (std::isfinite(loss) && loss < entry.loss)
        frontier.update(ParetoEntry{0, entry.complexity, loss, tuned});
    }
  }

  // final refinement of the archived constants; a few independent climbs per
  // entry since a badly conditioned parameterization can stall a single one
  const std::vector<ParetoEntry> snapshot = frontier.entries();
  for (const ParetoEntry& entry : snapshot) {
    for (int rep = 0; rep < 3; ++rep) {
      Expr tuned = optimize_constants(entry.expression, data, config.frontier_polish_steps, rng);
      const double loss = mse_loss(tuned, data);
      if (std::isfinite(loss) && loss < entry.loss)
        frontier.update(ParetoEntry{0, entry.complexity, loss, tuned});
    }
  }

  frontier.assign_ids();
  return frontier;
}

std::string frontier_to_json(const ParetoFrontier& frontier) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const ParetoEntry& e : frontier.entries()) {
    nlohmann::ordered_json item;
    item["id"] = e.id;
    item["complexity"] = e.complexity;
    item["loss"] = e.loss;
    item["expression"] = format_expression(e.expression);
    arr.push_back(std::move(item));
  }
  return arr.dump(2) + "\n";
}

ParetoFrontier frontier_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(std::string("invalid frontier JSON: ") + ex.what());
  }
  if (!doc.is_array()) throw Error("frontier JSON must be an array");
  ParetoFrontier frontier;
  for (const auto& item : doc) {
    ParetoEntry e;
    try {
      e.id = item.at("id").get<int>();
      e.complexity = item.at("complexity").get<int>();
      e.loss = item.at("loss").get<double>();
      e.expression = parse_expression(item.at("expression").get<std::string>());
    } catch (const nlohmann::json::exception& ex) {
      throw Error(std::string("invalid frontier JSON entry: ") + ex.what());
    }
    frontier.update(std::move(e));
  }
  // ids from the file are preserved only if they match complexity order
  return frontier;
}

}  // namespace ductsr
