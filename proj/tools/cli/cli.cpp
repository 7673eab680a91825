#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "service.hpp"
#include "usar/dataset_io.hpp"
#include "usar/error.hpp"
#include "usar/evaluation.hpp"
#include "usar/serialization.hpp"
#include "usar/synthetic.hpp"
#include "usar/toy_features.hpp"
#include "usar/usad.hpp"

namespace usar::cli {

using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int to_int(const std::string& s) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw UsageError("'" + s + "' is not an integer");
  return v;
}

struct ModelOptions {
  std::string catalog;
  std::string format;
  std::string bank;
  double bank_c = kDefaultBankTradeoffC;

  void attach(CLI::App* app, bool with_bank = true) {
    app->add_option("--catalog", catalog, "Catalog file (.jsonl or .csv); the toy corpus when omitted");
    app->add_option("--format", format, "Catalog format: jsonl or csv (default: by extension)");
    if (with_bank) {
      app->add_option("--bank", bank, "Attribute bank JSON; trained on the catalog when omitted");
      app->add_option("--bank-c", bank_c, "Trade-off C when training the bank")->check(CLI::PositiveNumber);
    }
  }

  Catalog load() const {
    if (catalog.empty()) return toy_corpus();
    return format.empty() ? load_catalog(catalog) : load_catalog(catalog, parse_catalog_format(format));
  }

  AttributeModelBank bank_for(const Catalog& cat) const {
    if (!bank.empty()) {
      auto b = load_bank(bank);
      if (b.dim != cat.dim() || b.attribute_names != cat.attribute_vocabulary() ||
          b.extractor != cat.extractor()) {
        throw Error(ErrorCode::data, "bank '" + bank + "' does not match the catalog");
      }
      return b;
    }
    UsarConfig cfg;
    cfg.tradeoff_c = bank_c;
    return train_bank(cat, cfg);
  }
};

struct SessionOptionsCli {
  std::string config;
  int m = -1, k = -1, iterations = -1;
  std::string metric;
  double c = -1;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "UsarConfig JSON file");
    app->add_option("--m", m, "Number of favorites");
    app->add_option("--k", k, "Rerank prefix length");
    app->add_option("--iterations", iterations, "Interaction budget N");
    app->add_option("--metric", metric, "euclidean or cosine");
    app->add_option("--c", c, "RankSVM trade-off C");
  }

  UsarConfig build() const {
    UsarConfig cfg;
    if (!config.empty()) cfg = load_json(config).get<UsarConfig>();
    if (m >= 0) cfg.m = m;
    if (k >= 0) cfg.k = k;
    if (iterations >= 0) cfg.max_iterations = iterations;
    if (!metric.empty()) cfg.distance_metric = parse_distance_metric(metric);
    if (c > 0) cfg.tradeoff_c = c;
    return cfg;
  }
};

void write_output(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_file_atomic(path, text);
  }
}

// Unset fields keep the toy corpus values.
SyntheticSpec parse_synthetic_spec(const std::string& text) {
  SyntheticSpec spec = toy_corpus_spec();
  if (text.empty()) return spec;
  json j;
  if (std::filesystem::exists(text)) {
    j = load_json(text);
  } else {
    // Inline form: n_items=200,dim=16,...
    j = json::object();
    std::istringstream in(text);
    std::string part;
    while (std::getline(in, part, ',')) {
      const auto eq = part.find('=');
      if (eq == std::string::npos) throw UsageError("bad synthetic spec entry '" + part + "'");
      const auto key = part.substr(0, eq);
      const auto value = part.substr(eq + 1);
      try {
        j[key] = std::stod(value);
      } catch (const std::exception&) {
        throw UsageError("bad value for '" + key + "'");
      }
    }
  }
  for (const auto& [key, value] : j.items()) {
    if (!value.is_number()) throw UsageError("synthetic spec field '" + key + "' must be a number");
    const double v = value.get<double>();
    if (key == "n_items") spec.n_items = static_cast<std::size_t>(v);
    else if (key == "dim") spec.dim = static_cast<std::size_t>(v);
    else if (key == "n_attribute_clusters" || key == "clusters") spec.n_attribute_clusters = static_cast<std::size_t>(v);
    else if (key == "seed") spec.seed = static_cast<std::uint64_t>(v);
    else if (key == "separation") spec.separation = v;
    else if (key == "noise") spec.noise = v;
    else throw UsageError("unknown synthetic spec field '" + key + "'");
  }
  return spec;
}

std::atomic<service::Server*> active_server{nullptr};

extern "C" void handle_stop_signal(int) {
  if (auto* s = active_server.load()) s->stop();
}

int serve(const std::string& config_path, const std::optional<std::string>& host,
          std::optional<int> port, const ModelOptions& models, const std::string& data_dir,
          std::ostream& err) {
  service::ServiceConfig cfg;
  if (!config_path.empty()) cfg = service::load_service_config(config_path);
  if (host) cfg.host = *host;
  if (port) cfg.port = *port;
  if (!models.catalog.empty()) cfg.catalog_path = models.catalog;
  if (!models.bank.empty()) cfg.bank_path = models.bank;
  if (!data_dir.empty()) cfg.data_dir = data_dir;
  cfg.bank_tradeoff_c = models.bank_c;

  auto [catalog, bank] = service::load_models(cfg);
  std::optional<std::filesystem::path> log_dir;
  if (cfg.data_dir) {
    log_dir = *cfg.data_dir / "sessions";
    std::filesystem::create_directories(*log_dir);
  }
  auto store = std::make_shared<SessionStore>(catalog, bank, cfg.session_defaults, log_dir);
  const auto restored = store->load_persisted();

  service::Server server(cfg, store);
  const int bound = server.bind();
  err << json{{"event", "listening"}, {"host", cfg.host}, {"port", bound},
              {"items", catalog->size()}, {"restored_sessions", restored}}
             .dump()
      << std::endl;
  active_server = &server;
  std::signal(SIGINT, handle_stop_signal);
  std::signal(SIGTERM, handle_stop_signal);
  server.listen();
  active_server = nullptr;
  // Event logs are appended as sessions change, so nothing is left to flush.
  err << json{{"event", "stopped"}, {"sessions", store->session_ids().size()}}.dump() << std::endl;
  return 0;
}

std::vector<std::filesystem::path> collect_images(const std::vector<std::string>& inputs) {
  std::vector<std::filesystem::path> files;
  for (const auto& in : inputs) {
    const std::filesystem::path p(in);
    if (std::filesystem::is_directory(p)) {
      std::vector<std::filesystem::path> found;
      for (const auto& e : std::filesystem::directory_iterator(p)) {
        auto ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(p);
    }
  }
  return files;
}

}  // namespace

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const int lo = to_int(text.substr(0, dots));
    const int hi = to_int(text.substr(dots + 2));
    if (hi < lo) throw UsageError("empty range '" + text + "'");
    for (int v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) out.push_back(to_int(part));
  if (out.empty()) throw UsageError("empty list");
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Personalized aesthetic ranking", "usar"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate a catalog file and print a summary");
  std::string ingest_path, ingest_format, ingest_out, ingest_out_format;
  ingest->add_option("path", ingest_path, "Catalog file")->required();
  ingest->add_option("--format", ingest_format, "jsonl or csv (default: by extension)");
  ingest->add_option("--out", ingest_out, "Write the validated catalog here");
  ingest->add_option("--out-format", ingest_out_format, "jsonl or csv for --out");

  // extract
  auto* extract = app.add_subcommand("extract", "Build a toy-feature catalog from PNG/JPEG images");
  std::vector<std::string> extract_inputs;
  std::string extract_out, extract_labels;
  extract->add_option("images", extract_inputs, "Image files or directories")->required();
  extract->add_option("--out", extract_out, "Output catalog (default stdout, JSONL)");
  extract->add_option("--labels", extract_labels, "CSV of file name,attr;attr;... lines");

  // gen-synthetic
  auto* gen = app.add_subcommand("gen-synthetic", "Generate a seeded synthetic catalog");
  std::string gen_spec, gen_out, gen_format = "jsonl";
  std::optional<std::uint64_t> gen_seed;
  gen->add_option("spec", gen_spec, "JSON file or inline n_items=..,dim=..,clusters=..,seed=..");
  gen->add_option("--seed", gen_seed, "Overrides the spec's seed");
  gen->add_option("--out", gen_out, "Output path (default stdout)");
  gen->add_option("--format", gen_format, "jsonl or csv");

  // train-bank
  auto* train = app.add_subcommand("train-bank", "Train the attribute classifier bank");
  ModelOptions train_models;
  std::string train_out;
  train_models.attach(train, false);
  train->add_option("--c", train_models.bank_c, "Trade-off C")->check(CLI::PositiveNumber);
  train->add_option("--out", train_out, "Output bank JSON")->required();

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run one session against a simulated user");
  ModelOptions sim_models;
  SessionOptionsCli sim_session;
  std::string sim_user_spec;
  std::uint64_t sim_seed = 0;
  double sim_noise = 0.0, sim_test_fraction = 0.25;
  sim_models.attach(sim);
  sim_session.attach(sim);
  sim->add_option("user-spec", sim_user_spec, "JSON {seed, noise_sigma, hidden_weights}");
  sim->add_option("--seed", sim_seed, "User and session seed");
  sim->add_option("--noise", sim_noise, "User noise sigma")->check(CLI::NonNegativeNumber);
  sim->add_option("--test-fraction", sim_test_fraction, "Held-out share of the catalog");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Mean rank correlation over an (m, interactions) grid");
  ModelOptions sweep_models;
  std::string sweep_m = "5,10,15", sweep_n = "1..5", sweep_format = "csv", sweep_spec;
  int sweep_reps = 20;
  unsigned sweep_threads = 1;
  std::uint64_t sweep_seed = 0;
  double sweep_noise = 0.0, sweep_test_fraction = 0.25;
  sweep_models.attach(sweep);
  sweep->add_option("grid-spec", sweep_spec, "JSON {m, interactions, reps} file");
  sweep->add_option("--m", sweep_m, "m values, e.g. 5,10,15 or 5..15");
  sweep->add_option("--interactions", sweep_n, "Interaction counts, e.g. 1..5");
  sweep->add_option("--reps", sweep_reps, "Repetitions per cell")->check(CLI::PositiveNumber);
  sweep->add_option("--seed", sweep_seed, "Base seed");
  sweep->add_option("--noise", sweep_noise, "User noise sigma")->check(CLI::NonNegativeNumber);
  sweep->add_option("--test-fraction", sweep_test_fraction, "Held-out share of the catalog");
  sweep->add_option("--threads", sweep_threads, "Worker threads")->check(CLI::PositiveNumber);
  sweep->add_option("--output", sweep_format, "csv, json or table")
      ->check(CLI::IsMember({"csv", "json", "table"}));

  // score
  auto* score = app.add_subcommand("score", "Rank catalog items by correlation with a USAD");
  ModelOptions score_models;
  std::string score_catalog, score_usad;
  std::vector<std::string> score_ids;
  int score_top = 0;
  score->add_option("catalog", score_catalog, "Catalog file")->required();
  score->add_option("usad", score_usad, "USAD JSON file")->required();
  score->add_option("--bank", score_models.bank, "Attribute bank JSON (trained when omitted)");
  score->add_option("--bank-c", score_models.bank_c, "Trade-off C when training the bank");
  score->add_option("--ids", score_ids, "Only these ids")->delimiter(',');
  score->add_option("--top", score_top, "Print only the first N");

  // serve
  auto* srv = app.add_subcommand("serve", "Run the HTTP service");
  ModelOptions serve_models;
  std::string serve_config, serve_data;
  std::optional<std::string> serve_host;
  std::optional<int> serve_port;
  serve_models.attach(srv);
  srv->add_option("--config", serve_config, "Service config JSON");
  srv->add_option("--host", serve_host, "Bind address");
  srv->add_option("--port", serve_port, "Port (0 picks a free one)");
  srv->add_option("--data-dir", serve_data, "Directory for session event logs");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usar: " << e.what() << "\n";
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return 1;
  }

  try {
    if (*ingest) {
      const auto cat = ingest_format.empty()
                           ? load_catalog(ingest_path)
                           : load_catalog(ingest_path, parse_catalog_format(ingest_format));
      if (!ingest_out.empty()) {
        const auto fmt = ingest_out_format.empty() ? format_from_path(ingest_out)
                                                   : parse_catalog_format(ingest_out_format);
        save_catalog(ingest_out, cat, fmt);
      }
      std::size_t labeled = 0, with_media = 0;
      for (const auto& item : cat.items()) {
        labeled += item.attribute_labels.empty() ? 0 : 1;
        with_media += item.media_path ? 1 : 0;
      }
      out << json{{"items", cat.size()},           {"dim", cat.dim()},
                  {"extractor", cat.extractor()},  {"attributes", cat.attribute_vocabulary()},
                  {"labeled_items", labeled},      {"items_with_media", with_media}}
                 .dump(2)
          << "\n";
    } else if (*extract) {
      std::map<std::string, std::vector<std::string>> labels;
      if (!extract_labels.empty()) {
        std::istringstream in(read_file(extract_labels));
        std::string line;
        while (std::getline(in, line)) {
          if (line.empty()) continue;
          const auto comma = line.find(',');
          const auto name = line.substr(0, comma);
          auto& list = labels[name];
          if (comma == std::string::npos) continue;
          std::istringstream attrs(line.substr(comma + 1));
          std::string a;
          while (std::getline(attrs, a, ';')) {
            if (!a.empty()) list.push_back(a);
          }
        }
      }
      std::vector<ItemRecord> items;
      for (const auto& path : collect_images(extract_inputs)) {
        ItemRecord item;
        item.id = path.stem().string();
        item.features = extract_toy_features(path);
        item.media_path = std::filesystem::absolute(path).string();
        if (auto it = labels.find(path.filename().string()); it != labels.end()) {
          item.attribute_labels = it->second;
        }
        items.push_back(std::move(item));
      }
      if (items.empty()) throw Error(ErrorCode::data, "no PNG or JPEG images found");
      const auto cat = Catalog::validate(std::move(items), {}, kToyExtractorName);
      std::ostringstream text;
      const auto fmt = extract_out.empty() ? CatalogFormat::jsonl : format_from_path(extract_out);
      write_catalog(text, cat, fmt);
      write_output(extract_out, text.str(), out);
    } else if (*gen) {
      auto spec = parse_synthetic_spec(gen_spec);
      if (gen_seed) spec.seed = *gen_seed;
      const auto cat = generate_synthetic(spec);
      std::ostringstream text;
      write_catalog(text, cat, parse_catalog_format(gen_format));
      write_output(gen_out, text.str(), out);
    } else if (*train) {
      const auto cat = train_models.load();
      const auto bank = train_models.bank_for(cat);
      save_json(train_out, bank);
      json stats = json::array();
      for (std::size_t a = 0; a < bank.size(); ++a) {
        stats.push_back({{"attribute", bank.attribute_names[a]},
                         {"positives", bank.training_stats[a].positives},
                         {"training_accuracy", bank.training_stats[a].training_accuracy}});
      }
      out << json{{"bank", train_out}, {"attributes", stats}}.dump(2) << "\n";
    } else if (*sim) {
      const auto cat = sim_models.load();
      const auto bank = sim_models.bank_for(cat);
      auto cfg = sim_session.build();
      cfg.rng_seed = sim_seed;
      SimulatedUser user = sample_user(cat, sim_seed, sim_noise);
      if (!sim_user_spec.empty()) {
        const auto j = load_json(sim_user_spec);
        user.seed = j.value("seed", sim_seed);
        user.noise_sigma = j.value("noise_sigma", sim_noise);
        if (j.contains("hidden_weights")) {
          user.hidden_weights = j["hidden_weights"].get<std::vector<double>>();
        } else {
          user.hidden_weights = sample_user(cat, user.seed, user.noise_sigma).hidden_weights;
        }
        cfg.rng_seed = user.seed;
      }
      const auto r = simulate_session(cat, bank, cfg, user, SimulationOptions{sim_test_fraction});
      out << json{{"seed", user.seed},
                  {"config", cfg},
                  {"rho", r.correlation.rho},
                  {"n", r.correlation.n},
                  {"d_squared_sum", r.correlation.d_squared_sum},
                  {"tie_adjusted", r.correlation.tie_adjusted},
                  {"pairwise_accuracy", r.pairwise_accuracy},
                  {"interactions", r.interactions},
                  {"satisfied", r.satisfied},
                  {"usad", r.usad},
                  {"usar_ranking", r.usar_ranking.ids()},
                  {"oracle_ranking", r.oracle_ranking.ids()}}
                 .dump(2)
          << "\n";
    } else if (*sweep) {
      if (!sweep_spec.empty()) {
        const auto j = load_json(sweep_spec);
        auto list_field = [&](const char* key, std::string& target) {
          if (!j.contains(key)) return;
          if (j[key].is_string()) {
            target = j[key].get<std::string>();
          } else {
            std::string joined;
            for (const auto& v : j[key]) joined += (joined.empty() ? "" : ",") + std::to_string(v.get<int>());
            target = joined;
          }
        };
        list_field("m", sweep_m);
        list_field("interactions", sweep_n);
        sweep_reps = j.value("reps", sweep_reps);
        sweep_seed = j.value("seed", sweep_seed);
      }
      const auto m_values = parse_int_list(sweep_m);
      const auto n_values = parse_int_list(sweep_n);
      const auto cat = sweep_models.load();
      const auto bank = sweep_models.bank_for(cat);
      UsarConfig cfg;
      cfg.rng_seed = sweep_seed;
      const auto result = parameter_sweep(cat, bank, cfg, m_values, n_values, sweep_reps,
                                          SweepOptions{sweep_noise, sweep_test_fraction, sweep_threads});
      if (sweep_format == "json") {
        out << sweep_to_json(result).dump(2) << "\n";
      } else if (sweep_format == "table") {
        out << render_sweep_table(result);
      } else {
        out << sweep_to_csv(result);
      }
    } else if (*score) {
      ModelOptions models = score_models;
      models.catalog = score_catalog;
      const auto cat = models.load();
      const auto bank = models.bank_for(cat);
      const auto usad = load_usad(score_usad);
      std::vector<ItemId> ids(score_ids.begin(), score_ids.end());
      if (ids.empty()) {
        for (const auto& item : cat.items()) ids.push_back(item.id);
      }
      const auto scored = score_test_set(usad, bank, cat, ids);
      const auto ranking = rank_test_set(usad, bank, cat, ids);
      std::map<ItemId, bool> undefined;
      for (const auto& s : scored) undefined[s.id] = s.undefined;
      out << "rank,id,score,undefined\n";
      char buf[64];
      for (std::size_t i = 0; i < ranking.size(); ++i) {
        if (score_top > 0 && i >= static_cast<std::size_t>(score_top)) break;
        const auto& e = ranking.entries[i];
        std::snprintf(buf, sizeof buf, "%.9f", e.score);
        out << (i + 1) << ',' << e.id << ',' << buf << ',' << (undefined[e.id] ? "true" : "false") << "\n";
      }
    } else if (*srv) {
      return serve(serve_config, serve_host, serve_port, serve_models, serve_data, err);
    }
  } catch (const UsageError& e) {
    err << "usar: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "usar: " << e.what() << "\n";
    return e.code() == ErrorCode::invalid_argument ? 1 : 2;
  } catch (const nlohmann::json::exception& e) {
    err << "usar: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "usar: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace usar::cli
