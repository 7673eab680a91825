#include "usar/serialization.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "usar/error.hpp"

namespace usar {

namespace {

std::vector<double> finite_vector(const nlohmann::json& j, const char* what) {
  auto v = j.get<std::vector<double>>();
  for (const double x : v) {
    if (!std::isfinite(x)) throw Error(ErrorCode::data, std::string(what) + " contains a non-finite value");
  }
  return v;
}

template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::data, std::string("malformed ") + what + ": " + ex.what());
  }
}

}  // namespace

nlohmann::json model_to_json(const RankingModel& model, const std::string& config_fingerprint) {
  return {
      {"weights", model.weights},
      {"objective", model.objective_value},
      {"epochs", model.epochs_run},
      {"converged", model.converged},
      {"config_fingerprint", config_fingerprint},
  };
}

RankingModel model_from_json(const nlohmann::json& j) {
  return guarded("ranking model", [&] {
    RankingModel m;
    m.weights = finite_vector(j.at("weights"), "model weights");
    m.objective_value = j.at("objective").get<double>();
    m.epochs_run = j.at("epochs").get<int>();
    m.converged = j.at("converged").get<bool>();
    return m;
  });
}

void to_json(nlohmann::json& j, const AttributeModelBank& bank) {
  j = nlohmann::json{
      {"attributes", bank.attribute_names},
      {"weights", bank.weights},
      {"intercepts", bank.intercepts},
      {"dim", bank.dim},
      {"extractor", bank.extractor},
  };
  auto stats = nlohmann::json::array();
  for (const auto& s : bank.training_stats) {
    stats.push_back({{"positives", s.positives},
                     {"negatives", s.negatives},
                     {"training_accuracy", s.training_accuracy},
                     {"iterations", s.iterations},
                     {"converged", s.converged}});
  }
  j["training_stats"] = std::move(stats);
}

void from_json(const nlohmann::json& j, AttributeModelBank& bank) {
  bank = guarded("attribute bank", [&] {
    AttributeModelBank b;
    b.attribute_names = j.at("attributes").get<std::vector<std::string>>();
    for (const auto& row : j.at("weights")) b.weights.push_back(finite_vector(row, "bank weights"));
    b.intercepts = finite_vector(j.at("intercepts"), "bank intercepts");
    if (b.weights.size() != b.attribute_names.size() ||
        b.intercepts.size() != b.attribute_names.size()) {
      throw Error(ErrorCode::data, "attribute bank needs one weight row and intercept per attribute");
    }
    b.dim = j.contains("dim") ? j.at("dim").get<std::size_t>()
                              : (b.weights.empty() ? 0 : b.weights.front().size());
    for (const auto& row : b.weights) {
      if (row.size() != b.dim) throw Error(ErrorCode::data, "attribute bank rows differ in dimension");
    }
    b.extractor = j.value("extractor", std::string{});
    if (j.contains("training_stats")) {
      for (const auto& s : j.at("training_stats")) {
        b.training_stats.push_back({s.at("positives").get<std::size_t>(),
                                    s.at("negatives").get<std::size_t>(),
                                    s.at("training_accuracy").get<double>(),
                                    s.value("iterations", 0), s.value("converged", false)});
      }
    }
    return b;
  });
}

void to_json(nlohmann::json& j, const UserAestheticDistribution& usad) {
  j = nlohmann::json{
      {"attributes", usad.attribute_names},
      {"probs", usad.dist.probs},
      {"generation", usad.source_ranking_generation},
      {"item_count", usad.source_item_count},
  };
}

void from_json(const nlohmann::json& j, UserAestheticDistribution& usad) {
  usad = guarded("aesthetic distribution", [&] {
    UserAestheticDistribution u;
    u.attribute_names = j.at("attributes").get<std::vector<std::string>>();
    u.dist.probs = finite_vector(j.at("probs"), "distribution");
    u.source_ranking_generation = j.at("generation").get<int>();
    u.source_item_count = j.at("item_count").get<std::size_t>();
    if (u.dist.probs.size() != u.attribute_names.size()) {
      throw Error(ErrorCode::data, "distribution length differs from its attribute list");
    }
    if (!u.dist.is_valid(1e-6) || u.source_item_count < 1) {
      throw Error(ErrorCode::data, "aesthetic distribution is not a valid distribution");
    }
    return u;
  });
}

void to_json(nlohmann::json& j, const RankedList& list) {
  auto entries = nlohmann::json::array();
  for (const auto& e : list.entries) entries.push_back({{"id", e.id}, {"score", e.score}});
  j = nlohmann::json{{"generation", list.generation}, {"entries", std::move(entries)}};
}

void from_json(const nlohmann::json& j, RankedList& list) {
  list = guarded("ranked list", [&] {
    RankedList out;
    out.generation = j.at("generation").get<int>();
    for (const auto& e : j.at("entries")) {
      out.entries.push_back({e.at("id").get<std::string>(), e.at("score").get<double>()});
    }
    return out;
  });
}

void to_json(nlohmann::json& j, const RerankFeedback& fb) {
  j = nlohmann::json{{"ordered_prefix", fb.ordered_prefix},
                     {"deletions", fb.deletions},
                     {"satisfied", fb.satisfied}};
}

void from_json(const nlohmann::json& j, RerankFeedback& fb) {
  fb = guarded("feedback", [&] {
    RerankFeedback out;
    out.ordered_prefix = j.value("ordered_prefix", std::vector<ItemId>{});
    out.deletions = j.value("deletions", std::vector<ItemId>{});
    out.satisfied = j.value("satisfied", false);
    return out;
  });
}

nlohmann::json session_to_json(const Session& s, std::size_t ranking_limit) {
  RankedList ranking = s.current_ranking;
  if (ranking.entries.size() > ranking_limit) ranking.entries.resize(ranking_limit);
  nlohmann::json j{
      {"session_id", s.session_id},
      {"status", to_string(s.status)},
      {"iteration", s.iteration},
      {"max_iterations", s.config.max_iterations},
      {"m", s.config.m},
      {"k", s.config.k},
      {"favorites", s.favorite_ids},
      {"shown", s.shown()},
      {"ranking", ranking},
      {"deleted", s.deleted_ids},
      {"model_history", s.model_history},
  };
  if (s.usad) j["usad"] = *s.usad;
  return j;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::io, "short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::io, "cannot rename into '" + path.string() + "': " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "file not found: '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

nlohmann::json load_json(const std::filesystem::path& path) {
  const auto text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& ex) {
    throw Error(ErrorCode::data, "'" + path.string() + "': " + ex.what());
  }
}

AttributeModelBank load_bank(const std::filesystem::path& path) {
  return load_json(path).get<AttributeModelBank>();
}

UserAestheticDistribution load_usad(const std::filesystem::path& path) {
  return load_json(path).get<UserAestheticDistribution>();
}

}  // namespace usar
