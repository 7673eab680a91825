#include "service.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numeric>
#include <random>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "usar/dataset_io.hpp"
#include "usar/error.hpp"
#include "usar/hash.hpp"
#include "usar/serialization.hpp"
#include "usar/synthetic.hpp"
#include "usar/usad.hpp"

namespace usar::service {

using nlohmann::json;

void to_json(json& j, const ServiceConfig& cfg) {
  j = json{{"host", cfg.host},
           {"port", cfg.port},
           {"bank_tradeoff_c", cfg.bank_tradeoff_c},
           {"page_size", cfg.page_size},
           {"session_defaults", cfg.session_defaults}};
  if (cfg.catalog_path) j["catalog"] = cfg.catalog_path->string();
  if (cfg.bank_path) j["bank"] = cfg.bank_path->string();
  if (cfg.data_dir) j["data_dir"] = cfg.data_dir->string();
}

void from_json(const json& j, ServiceConfig& cfg) {
  static const std::vector<std::string> known = {"host",      "port",     "catalog",
                                                 "bank",      "data_dir", "bank_tradeoff_c",
                                                 "page_size", "session_defaults"};
  if (!j.is_object()) throw Error(ErrorCode::invalid_argument, "service config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorCode::invalid_argument, "unknown service config key '" + key + "'");
    }
  }
  try {
    cfg.host = j.value("host", cfg.host);
    cfg.port = j.value("port", cfg.port);
    if (j.contains("catalog")) cfg.catalog_path = j["catalog"].get<std::string>();
    if (j.contains("bank")) cfg.bank_path = j["bank"].get<std::string>();
    if (j.contains("data_dir")) cfg.data_dir = j["data_dir"].get<std::string>();
    cfg.bank_tradeoff_c = j.value("bank_tradeoff_c", cfg.bank_tradeoff_c);
    cfg.page_size = j.value("page_size", cfg.page_size);
    if (j.contains("session_defaults")) cfg.session_defaults = j["session_defaults"].get<UsarConfig>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("bad service config: ") + e.what());
  }
  if (cfg.port < 0 || cfg.port > 65535) throw Error(ErrorCode::invalid_argument, "port out of range");
  if (cfg.page_size == 0) throw Error(ErrorCode::invalid_argument, "page_size must be positive");
  cfg.session_defaults.validate();
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
  ServiceConfig cfg;
  from_json(load_json(path), cfg);
  // Relative paths in the file are relative to the file.
  const auto base = path.parent_path();
  for (auto* p : {&cfg.catalog_path, &cfg.bank_path, &cfg.data_dir}) {
    if (*p && p->value().is_relative()) *p = base / p->value();
  }
  return cfg;
}

std::pair<std::shared_ptr<const Catalog>, std::shared_ptr<const AttributeModelBank>>
load_models(const ServiceConfig& cfg) {
  auto catalog = std::make_shared<const Catalog>(cfg.catalog_path ? load_catalog(*cfg.catalog_path)
                                                                  : toy_corpus());
  std::shared_ptr<const AttributeModelBank> bank;
  if (cfg.bank_path) {
    bank = std::make_shared<const AttributeModelBank>(load_bank(*cfg.bank_path));
    if (bank->dim != catalog->dim() || bank->extractor != catalog->extractor() ||
        bank->attribute_names != catalog->attribute_vocabulary()) {
      throw Error(ErrorCode::data, "attribute bank '" + cfg.bank_path->string() +
                                       "' was not trained on this catalog's features and attributes");
    }
  } else {
    UsarConfig bank_cfg = cfg.session_defaults;
    bank_cfg.tradeoff_c = cfg.bank_tradeoff_c;
    bank = std::make_shared<const AttributeModelBank>(train_bank(*catalog, bank_cfg));
  }
  return {catalog, bank};
}

namespace {

struct HttpError {
  int status;
  std::string message;
};

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::not_found: return 404;
    case ErrorCode::conflict: return 409;
    case ErrorCode::invalid_argument:
    case ErrorCode::data: return 422;
    case ErrorCode::numeric:
    case ErrorCode::io: return 500;
  }
  return 500;
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw HttpError{400, "request body must be a JSON object"};
    return j;
  } catch (const json::parse_error& e) {
    throw HttpError{400, std::string("malformed JSON: ") + e.what()};
  }
}

template <typename T>
T field(const json& body, const char* name, T fallback) {
  if (!body.contains(name) || body[name].is_null()) return fallback;
  try {
    return body[name].get<T>();
  } catch (const json::exception&) {
    throw HttpError{400, std::string("field '") + name + "' has the wrong type"};
  }
}

std::optional<std::string> idempotency_key(const httplib::Request& req) {
  if (!req.has_header("Idempotency-Key")) return std::nullopt;
  auto key = req.get_header_value("Idempotency-Key");
  if (key.empty()) return std::nullopt;
  return key;
}

long query_int(const httplib::Request& req, const char* name, long fallback, long lo, long hi) {
  if (!req.has_param(name)) return fallback;
  const auto text = req.get_param_value(name);
  try {
    std::size_t used = 0;
    const long v = std::stol(text, &used);
    if (used != text.size() || v < lo || v > hi) throw std::out_of_range(text);
    return v;
  } catch (const std::exception&) {
    throw HttpError{400, std::string("query parameter '") + name + "' must be an integer in [" +
                             std::to_string(lo) + ", " + std::to_string(hi) + "]"};
  }
}

std::string content_type_for(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  return "application/octet-stream";
}

json item_summary(const ItemRecord& item) {
  json j{{"id", item.id}, {"attributes", item.attribute_labels}};
  j["media_url"] = item.media_path ? json("/media/" + item.id) : json(nullptr);
  return j;
}

thread_local std::chrono::steady_clock::time_point request_start;

}  // namespace

struct Server::Impl {
  httplib::Server http;
  std::mutex log_mutex;
};

Server::Server(ServiceConfig cfg, std::shared_ptr<SessionStore> store)
    : impl_(std::make_unique<Impl>()), cfg_(std::move(cfg)), store_(std::move(store)) {
  auto& http = impl_->http;

  // Every handler goes through here so errors map to one JSON shape.
  auto wrap = [](auto handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const HttpError& e) {
        reply(res, e.status, {{"error", e.message}});
      } catch (const Error& e) {
        reply(res, status_for(e.code()), {{"error", e.what()}, {"code", to_string(e.code())}});
      } catch (const std::exception& e) {
        reply(res, 500, {{"error", e.what()}});
      }
    };
  };

  http.set_pre_routing_handler([](const httplib::Request&, httplib::Response&) {
    request_start = std::chrono::steady_clock::now();
    return httplib::Server::HandlerResponse::Unhandled;
  });
  http.set_logger([this](const httplib::Request& req, const httplib::Response& res) {
    const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                             request_start)
                        .count();
    const json line{{"method", req.method}, {"path", req.path}, {"status", res.status},
                    {"duration_ms", std::round(ms * 1000.0) / 1000.0}};
    std::lock_guard lock(impl_->log_mutex);
    std::cerr << line.dump() << '\n';
  });

  http.Post("/sessions", wrap([this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    if (!body.contains("favorites")) throw HttpError{400, "missing field 'favorites'"};
    auto favorites = field<std::vector<ItemId>>(body, "favorites", {});
    std::optional<UsarConfig> cfg;
    if (body.contains("config")) {
      // Partial overrides on top of the service defaults.
      json merged = store_->defaults();
      if (!body["config"].is_object()) throw HttpError{400, "field 'config' must be an object"};
      merged.update(body["config"]);
      try {
        cfg = merged.get<UsarConfig>();
      } catch (const json::exception& e) {
        throw HttpError{400, std::string("bad config: ") + e.what()};
      }
    }
    const auto s = store_->create(std::move(favorites), cfg, idempotency_key(req));
    reply(res, 201, session_to_json(s));
  }));

  http.Get(R"(/sessions/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
    reply(res, 200, session_to_json(store_->get(req.matches[1])));
  }));

  http.Get(R"(/sessions/([^/]+)/ranking)",
           wrap([this](const httplib::Request& req, httplib::Response& res) {
             const auto s = store_->get(req.matches[1]);
             const auto top = query_int(req, "top", static_cast<long>(s.current_ranking.size()), 1,
                                        std::numeric_limits<int>::max());
             RankedList ranking = s.current_ranking;
             if (ranking.entries.size() > static_cast<std::size_t>(top)) {
               ranking.entries.resize(static_cast<std::size_t>(top));
             }
             reply(res, 200,
                   {{"session_id", s.session_id}, {"iteration", s.iteration},
                    {"status", to_string(s.status)}, {"ranking", ranking}});
           }));

  http.Post(R"(/sessions/([^/]+)/feedback)",
            wrap([this](const httplib::Request& req, httplib::Response& res) {
              const auto body = parse_body(req);
              RerankFeedback fb;
              fb.ordered_prefix = field<std::vector<ItemId>>(body, "ordered_prefix", {});
              fb.deletions = field<std::vector<ItemId>>(body, "deletions", {});
              fb.satisfied = field<bool>(body, "satisfied", false);
              std::optional<int> iteration;
              if (body.contains("iteration")) iteration = field<int>(body, "iteration", 0);
              const auto s = store_->submit(req.matches[1], fb, iteration, idempotency_key(req));
              reply(res, 200, session_to_json(s));
            }));

  http.Post(R"(/sessions/([^/]+)/finalize)",
            wrap([this](const httplib::Request& req, httplib::Response& res) {
              reply(res, 200, session_to_json(store_->finalize(req.matches[1], idempotency_key(req))));
            }));

  http.Get(R"(/sessions/([^/]+)/usad)", wrap([this](const httplib::Request& req, httplib::Response& res) {
    const auto s = store_->get(req.matches[1]);
    if (!s.usad) {
      throw HttpError{409, "session '" + s.session_id + "' is " + to_string(s.status) +
                               "; the aesthetic distribution exists after finalize"};
    }
    reply(res, 200, *s.usad);
  }));

  http.Post("/score", wrap([this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    UserAestheticDistribution usad;
    if (body.contains("session_id")) {
      const auto s = store_->get(field<std::string>(body, "session_id", ""));
      if (!s.usad) throw HttpError{409, "session '" + s.session_id + "' is not finalized"};
      usad = *s.usad;
    } else if (body.contains("usad")) {
      try {
        usad = body["usad"].get<UserAestheticDistribution>();
      } catch (const json::exception& e) {
        throw HttpError{400, std::string("bad usad: ") + e.what()};
      }
    } else {
      throw HttpError{400, "provide 'session_id' or 'usad'"};
    }
    const auto& catalog = store_->catalog();
    std::vector<ItemId> ids;
    if (body.contains("ids")) {
      ids = field<std::vector<ItemId>>(body, "ids", {});
    } else {
      for (const auto& item : catalog.items()) ids.push_back(item.id);
    }
    if (ids.empty()) throw HttpError{422, "no ids to score"};
    const auto scored = score_test_set(usad, store_->bank(), catalog, ids);
    const auto ranking = rank_test_set(usad, store_->bank(), catalog, ids);
    json flags = json::object();
    for (const auto& s : scored) flags[s.id] = s.undefined;
    json out = json::array();
    for (const auto& e : ranking.entries) {
      out.push_back({{"id", e.id}, {"score", e.score}, {"undefined", flags[e.id]}});
    }
    reply(res, 200, {{"ranking", out}});
  }));

  http.Get("/catalog/items", wrap([this](const httplib::Request& req, httplib::Response& res) {
    const auto& catalog = store_->catalog();
    const auto page_size = static_cast<std::size_t>(
        query_int(req, "page_size", static_cast<long>(cfg_.page_size), 1, 1000));
    const auto pages = (catalog.size() + page_size - 1) / page_size;
    const auto page = static_cast<std::size_t>(query_int(req, "page", 0, 0, 1L << 30));
    json items = json::array();
    for (std::size_t i = page * page_size; i < std::min(catalog.size(), (page + 1) * page_size); ++i) {
      items.push_back(item_summary(catalog.item(i)));
    }
    reply(res, 200,
          {{"items", items}, {"page", page}, {"page_size", page_size}, {"pages", pages},
           {"total", catalog.size()}});
  }));

  http.Get("/catalog/sample", wrap([this](const httplib::Request& req, httplib::Response& res) {
    const auto& catalog = store_->catalog();
    const auto n = static_cast<std::size_t>(
        query_int(req, "n", static_cast<long>(cfg_.page_size), 1, static_cast<long>(catalog.size())));
    const auto seed = static_cast<std::uint64_t>(query_int(req, "seed", 0, 0, std::numeric_limits<long>::max()));
    std::vector<std::size_t> order(catalog.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(mix_seed(seed, 0x73616d706c65ULL));
    std::shuffle(order.begin(), order.end(), rng);
    json items = json::array();
    for (std::size_t i = 0; i < n; ++i) items.push_back(item_summary(catalog.item(order[i])));
    reply(res, 200, {{"items", items}, {"seed", seed}});
  }));

  http.Get(R"(/media/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
    const auto& item = store_->catalog().item(store_->catalog().index_of(req.matches[1]));
    if (!item.media_path) throw HttpError{404, "item '" + item.id + "' has no media"};
    std::ifstream in(*item.media_path, std::ios::binary);
    if (!in) throw HttpError{404, "media file for '" + item.id + "' is missing"};
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    res.status = 200;
    res.set_content(std::move(bytes), content_type_for(*item.media_path));
  }));

  http.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, {{"status", "ok"}});
  });
}

Server::~Server() { stop(); }

int Server::bind() {
  auto& http = impl_->http;
  if (cfg_.port == 0) {
    port_ = http.bind_to_any_port(cfg_.host);
    if (port_ < 0) throw Error(ErrorCode::io, "cannot bind " + cfg_.host);
  } else {
    if (!http.bind_to_port(cfg_.host, cfg_.port)) {
      throw Error(ErrorCode::io, "cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port) +
                                     " (port busy?)");
    }
    port_ = cfg_.port;
  }
  return port_;
}

void Server::listen() { impl_->http.listen_after_bind(); }

void Server::stop() {
  if (impl_ && impl_->http.is_running()) impl_->http.stop();
}

bool Server::running() const { return impl_->http.is_running(); }

}  // namespace usar::service
