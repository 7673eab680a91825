#include "usar/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "usar/error.hpp"
#include "usar/hash.hpp"
#include "usar/interaction.hpp"

namespace usar {

namespace {

void require_same_items(const RankedList& a, const RankedList& b) {
  std::set<ItemId> sa, sb;
  for (const auto& e : a.entries) sa.insert(e.id);
  for (const auto& e : b.entries) sb.insert(e.id);
  if (sa.size() != a.size() || sb.size() != b.size()) {
    throw Error(ErrorCode::invalid_argument, "ranked list contains duplicate ids");
  }
  if (sa == sb) return;
  std::vector<ItemId> diff;
  std::set_symmetric_difference(sa.begin(), sa.end(), sb.begin(), sb.end(),
                                std::back_inserter(diff));
  std::string listed;
  for (std::size_t i = 0; i < diff.size() && i < 20; ++i) listed += (i ? ", " : "") + diff[i];
  if (diff.size() > 20) listed += ", ...";
  throw Error(ErrorCode::invalid_argument, "ranked lists cover different items: " + listed);
}

bool has_ties(const RankedList& list) {
  for (std::size_t i = 1; i < list.size(); ++i) {
    if (list.entries[i].score == list.entries[i - 1].score) return true;
  }
  return false;
}

// 1-based ranks by list position; runs of equal score share their mean rank.
std::unordered_map<ItemId, double> average_ranks(const RankedList& list) {
  std::unordered_map<ItemId, double> ranks;
  std::size_t i = 0;
  while (i < list.size()) {
    std::size_t j = i;
    while (j + 1 < list.size() && list.entries[j + 1].score == list.entries[i].score) ++j;
    const double mean_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) ranks[list.entries[t].id] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

double sample_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (const double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace

RankCorrelationReport spearman_rho(const RankedList& a, const RankedList& b) {
  require_same_items(a, b);
  const std::size_t n = a.size();
  if (n < 2) throw Error(ErrorCode::invalid_argument, "spearman_rho needs at least 2 items");

  RankCorrelationReport report;
  report.n = n;
  report.tie_adjusted = has_ties(a) || has_ties(b);

  if (!report.tie_adjusted) {
    std::unordered_map<ItemId, std::size_t> pos_b;
    for (std::size_t i = 0; i < n; ++i) pos_b[b.entries[i].id] = i;
    double d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = static_cast<double>(i) - static_cast<double>(pos_b.at(a.entries[i].id));
      d2 += d * d;
    }
    const double nn = static_cast<double>(n);
    report.d_squared_sum = d2;
    report.rho = 1.0 - 6.0 * d2 / (nn * nn * nn - nn);
    return report;
  }

  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  std::vector<double> xa, xb;
  xa.reserve(n);
  xb.reserve(n);
  for (const auto& e : a.entries) {
    xa.push_back(ra.at(e.id));
    xb.push_back(rb.at(e.id));
    report.d_squared_sum += (xa.back() - xb.back()) * (xa.back() - xb.back());
  }
  report.rho = pearson(xa, xb).value_or(0.0);
  return report;
}

double pairwise_accuracy(const RankedList& predicted, const RankedList& truth) {
  require_same_items(predicted, truth);
  const std::size_t n = predicted.size();
  if (n < 2) return 1.0;
  std::unordered_map<ItemId, std::size_t> pos;
  for (std::size_t i = 0; i < n; ++i) pos[truth.entries[i].id] = i;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = pos.at(predicted.entries[i].id);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) agree += order[i] < order[j] ? 1 : 0;
  }
  return static_cast<double>(agree) / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

std::vector<double> SimulatedUser::utilities(const Catalog& catalog) const {
  if (hidden_weights.size() != catalog.dim()) {
    throw Error(ErrorCode::invalid_argument, "simulated user weights do not match catalog dimension");
  }
  const double norm = std::sqrt(dot(hidden_weights, hidden_weights));
  if (norm == 0.0) throw Error(ErrorCode::invalid_argument, "simulated user weights are all zero");

  std::mt19937_64 rng(mix_seed(seed, 0x6e6f697365ULL));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> u(catalog.size());
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    u[i] = dot(hidden_weights, catalog.features(i)) / norm;
    const double eps = gauss(rng);
    if (noise_sigma > 0.0) u[i] += noise_sigma * eps;
  }
  return u;
}

SimulatedUser sample_user(const Catalog& catalog, std::uint64_t seed, double noise_sigma) {
  SimulatedUser user;
  user.seed = seed;
  user.noise_sigma = noise_sigma;
  std::mt19937_64 rng(mix_seed(seed, 0x7573657273ULL));

  std::vector<std::size_t> labeled_attributes;
  for (std::size_t a = 0; a < catalog.attribute_vocabulary().size(); ++a) {
    const auto& name = catalog.attribute_vocabulary()[a];
    for (const auto& item : catalog.items()) {
      if (std::find(item.attribute_labels.begin(), item.attribute_labels.end(), name) !=
          item.attribute_labels.end()) {
        labeled_attributes.push_back(a);
        break;
      }
    }
  }

  user.hidden_weights.assign(catalog.dim(), 0.0);
  if (!labeled_attributes.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, labeled_attributes.size() - 1);
    const auto& name = catalog.attribute_vocabulary()[labeled_attributes[pick(rng)]];
    std::size_t count = 0;
    for (std::size_t i = 0; i < catalog.size(); ++i) {
      const auto& labels = catalog.item(i).attribute_labels;
      if (std::find(labels.begin(), labels.end(), name) == labels.end()) continue;
      const auto f = catalog.features(i);
      for (std::size_t d = 0; d < f.size(); ++d) user.hidden_weights[d] += f[d];
      ++count;
    }
    for (double& w : user.hidden_weights) w /= static_cast<double>(count);
  }
  if (dot(user.hidden_weights, user.hidden_weights) == 0.0) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double& w : user.hidden_weights) w = gauss(rng);
  }
  return user;
}

SimulationResult simulate_session(const Catalog& catalog, const AttributeModelBank& bank,
                                  const UsarConfig& cfg, const SimulatedUser& user,
                                  const SimulationOptions& options) {
  cfg.validate();
  if (!(options.test_fraction > 0.0 && options.test_fraction < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "test_fraction must lie in (0, 1)");
  }
  const auto utility = user.utilities(catalog);

  std::vector<std::size_t> order(catalog.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed(user.seed, 0x73706c6974ULL));
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::ceil(options.test_fraction * static_cast<double>(catalog.size()))));
  if (catalog.size() < n_test + static_cast<std::size_t>(cfg.m) + 1) {
    throw Error(ErrorCode::invalid_argument,
                "catalog of " + std::to_string(catalog.size()) + " items is too small for m = " +
                    std::to_string(cfg.m) + " plus a test split of " + std::to_string(n_test));
  }

  std::vector<ItemId> test_ids;
  std::vector<std::size_t> train;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (r < n_test) {
      test_ids.push_back(catalog.item(order[r]).id);
    } else {
      train.push_back(order[r]);
    }
  }

  auto by_utility = [&](const ItemId& x, const ItemId& y) {
    const double ux = utility[catalog.index_of(x)];
    const double uy = utility[catalog.index_of(y)];
    if (ux != uy) return ux > uy;
    return x < y;
  };

  std::vector<ItemId> train_ids;
  for (const auto i : train) train_ids.push_back(catalog.item(i).id);
  std::sort(train_ids.begin(), train_ids.end(), by_utility);
  std::vector<ItemId> favorites(train_ids.begin(), train_ids.begin() + cfg.m);

  Session session = start_session(catalog, bank, cfg, favorites,
                                   SessionOptions{"simulated", test_ids});
  while (session.status == SessionStatus::awaiting_feedback &&
         session.iteration < cfg.max_iterations) {
    RerankFeedback feedback;
    feedback.ordered_prefix = session.shown();
    std::sort(feedback.ordered_prefix.begin(), feedback.ordered_prefix.end(), by_utility);
    session = submit_feedback(session, feedback, catalog);
  }
  const bool satisfied = session.status == SessionStatus::satisfied;
  session = finalize(session, bank, catalog);

  SimulationResult result;
  result.interactions = session.iteration;
  result.satisfied = satisfied;
  result.usad = *session.usad;
  result.usar_ranking = rank_test_set(result.usad, bank, catalog, test_ids);
  std::vector<RankedEntry> oracle;
  for (const auto& id : test_ids) oracle.push_back({id, utility[catalog.index_of(id)]});
  result.oracle_ranking = make_ranked_list(std::move(oracle));
  result.correlation = spearman_rho(result.usar_ranking, result.oracle_ranking);
  result.pairwise_accuracy = pairwise_accuracy(result.usar_ranking, result.oracle_ranking);
  return result;
}

const SweepCell& SweepResult::at(int m, int interactions) const {
  for (const auto& cell : cells) {
    if (cell.m == m && cell.interactions == interactions) return cell;
  }
  throw Error(ErrorCode::not_found, "no sweep cell for m = " + std::to_string(m) +
                                        ", interactions = " + std::to_string(interactions));
}

SweepResult parameter_sweep(const Catalog& catalog, const AttributeModelBank& bank,
                            const UsarConfig& base_cfg, const std::vector<int>& m_values,
                            const std::vector<int>& interaction_values, int repetitions,
                            const SweepOptions& options) {
  base_cfg.validate();
  if (repetitions < 1) throw Error(ErrorCode::invalid_argument, "repetitions must be >= 1");
  if (m_values.empty() || interaction_values.empty()) {
    throw Error(ErrorCode::invalid_argument, "sweep grid is empty");
  }
  for (const int v : m_values) {
    if (v < 1) throw Error(ErrorCode::invalid_argument, "m values must be positive");
  }
  for (const int v : interaction_values) {
    if (v < 0) throw Error(ErrorCode::invalid_argument, "interaction counts must be >= 0");
  }

  SweepResult result;
  result.m_values = m_values;
  result.interaction_values = interaction_values;
  for (const int m : m_values) {
    for (const int n : interaction_values) {
      SweepCell cell;
      cell.m = m;
      cell.interactions = n;
      cell.repetitions = repetitions;
      result.cells.push_back(cell);
    }
  }

  auto run_cell = [&](SweepCell& cell) {
    UsarConfig cfg = base_cfg;
    cfg.m = cell.m;
    cfg.max_iterations = cell.interactions;
    const auto cell_seed =
        mix_seed(mix_seed(base_cfg.rng_seed, static_cast<std::uint64_t>(cell.m)),
                 static_cast<std::uint64_t>(cell.interactions));
    for (int r = 0; r < repetitions; ++r) {
      cfg.rng_seed = mix_seed(cell_seed, static_cast<std::uint64_t>(r));
      const auto user = sample_user(
          catalog, mix_seed(base_cfg.rng_seed, 0x1000 + static_cast<std::uint64_t>(r)),
          options.noise_sigma);
      try {
        const auto sim = simulate_session(catalog, bank, cfg, user,
                                          SimulationOptions{options.test_fraction});
        cell.rhos.push_back(sim.correlation.rho);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::invalid_argument) throw;
        cell.feasible = false;
        cell.rhos.clear();
        return;
      }
    }
    cell.mean_rho = std::accumulate(cell.rhos.begin(), cell.rhos.end(), 0.0) /
                    static_cast<double>(cell.rhos.size());
    cell.std_rho = sample_std(cell.rhos, cell.mean_rho);
  };

  const unsigned threads = std::max(1u, options.threads);
  if (threads == 1) {
    for (auto& cell : result.cells) run_cell(cell);
  } else {
    std::vector<std::future<void>> pending;
    std::size_t next = 0;
    while (next < result.cells.size() || !pending.empty()) {
      while (pending.size() < threads && next < result.cells.size()) {
        pending.push_back(std::async(std::launch::async, run_cell, std::ref(result.cells[next++])));
      }
      pending.front().get();
      pending.erase(pending.begin());
    }
  }
  return result;
}

std::string sweep_to_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "m,interactions,mean_rho,std_rho,repetitions\n";
  char buf[64];
  for (const auto& cell : result.cells) {
    out << cell.m << ',' << cell.interactions << ',';
    if (cell.feasible) {
      std::snprintf(buf, sizeof buf, "%.6f,%.6f", cell.mean_rho, cell.std_rho);
      out << buf;
    } else {
      out << "infeasible,infeasible";
    }
    out << ',' << cell.repetitions << '\n';
  }
  return out.str();
}

nlohmann::json sweep_to_json(const SweepResult& result) {
  auto cells = nlohmann::json::array();
  for (const auto& cell : result.cells) {
    nlohmann::json c{{"m", cell.m},
                     {"interactions", cell.interactions},
                     {"repetitions", cell.repetitions},
                     {"feasible", cell.feasible}};
    if (cell.feasible) {
      c["mean_rho"] = cell.mean_rho;
      c["std_rho"] = cell.std_rho;
      c["rhos"] = cell.rhos;
    }
    cells.push_back(std::move(c));
  }
  return {{"m_values", result.m_values},
          {"interaction_values", result.interaction_values},
          {"cells", std::move(cells)}};
}

std::string render_sweep_table(const SweepResult& result) {
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-14s", "interactions");
  out << buf;
  for (const int m : result.m_values) {
    std::snprintf(buf, sizeof buf, " | m=%-14d", m);
    out << buf;
  }
  out << '\n' << std::string(14 + result.m_values.size() * 19, '-') << '\n';
  for (const int n : result.interaction_values) {
    std::snprintf(buf, sizeof buf, "%-14d", n);
    out << buf;
    for (const int m : result.m_values) {
      const auto& cell = result.at(m, n);
      if (cell.feasible) {
        std::snprintf(buf, sizeof buf, " | %.4f +- %.4f", cell.mean_rho, cell.std_rho);
      } else {
        std::snprintf(buf, sizeof buf, " | %-16s", "infeasible");
      }
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace usar
