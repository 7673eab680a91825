#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "usar/attribute_classifier.hpp"
#include "usar/catalog.hpp"
#include "usar/config.hpp"
#include "usar/session_store.hpp"

namespace usar::service {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::filesystem::path> catalog_path;  // toy corpus when unset
  std::optional<std::filesystem::path> bank_path;     // trained at startup when unset
  std::optional<std::filesystem::path> data_dir;      // session event logs
  double bank_tradeoff_c = kDefaultBankTradeoffC;
  std::size_t page_size = 48;
  UsarConfig session_defaults;
};

void to_json(nlohmann::json& j, const ServiceConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, ServiceConfig& cfg);
ServiceConfig load_service_config(const std::filesystem::path& path);

/// Catalog and bank named by `cfg`, defaulting to the toy corpus and a bank
/// trained on it. A loaded bank must match the catalog's dimension,
/// extractor and attribute vocabulary.
std::pair<std::shared_ptr<const Catalog>, std::shared_ptr<const AttributeModelBank>>
load_models(const ServiceConfig& cfg);

/// JSON-over-HTTP front end of a SessionStore.
class Server {
 public:
  Server(ServiceConfig cfg, std::shared_ptr<SessionStore> store);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds the configured host and port (0 picks a free port). Throws
  /// Error(io) when the port is unavailable.
  int bind();
  /// Serves until stop(); call bind() first.
  void listen();
  void stop();
  bool running() const;
  int port() const { return port_; }

  SessionStore& store() { return *store_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  ServiceConfig cfg_;
  std::shared_ptr<SessionStore> store_;
  int port_ = 0;
};

}  // namespace usar::service
