#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "idec/backend.hpp"

namespace idec {

struct RemoteOptions {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::seconds timeout{60};
  // Whether the server was started with deterministic kernels.
  bool deterministic = true;
};

// Client for the logit wire protocol:
//   GET  /v1/meta        -> {"vocab_size", "eos_token_id", "tokenizer_fingerprint", "max_context"}
//   POST /v1/logits      {"prompt", "generated_ids"} -> {"logits": [...]}
//   POST /v1/detokenize  {"ids"} -> {"text"}
// Each request is retried up to `attempts` times with exponential backoff.
// Metadata is fetched once at construction.
class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(std::string base_url, RemoteOptions options = {});

  BackendMeta meta() const override { return meta_; }
  LogitVector next_logits(const Session& session) const override;
  std::string detokenize(std::span<const TokenId> ids) const override;
  std::string name() const override { return base_url_; }
  bool deterministic() const override { return options_.deterministic; }
  bool prefers_concurrent_requests() const override { return true; }

 private:
  std::string post(const std::string& path, const std::string& body) const;

  std::string base_url_;
  RemoteOptions options_;
  BackendMeta meta_;
};

// Serves any Backend over the wire protocol. Used by the CLI to expose the
// toy models and by the protocol tests.
class LogitServer {
 public:
  explicit LogitServer(std::shared_ptr<const Backend> backend);
  ~LogitServer();
  LogitServer(const LogitServer&) = delete;
  LogitServer& operator=(const LogitServer&) = delete;

  // Binds to an ephemeral port and returns it.
  int bind_any_port(const std::string& host = "127.0.0.1");
  bool bind(const std::string& host, int port);
  // Blocks until stop() is called.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace idec
