#include "idec/remote_backend.hpp"

#include <cmath>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "idec/errors.hpp"

namespace idec {

namespace {

using nlohmann::json;

constexpr const char* kJson = "application/json";

std::unique_ptr<httplib::Client> make_client(const std::string& url, const RemoteOptions& opts) {
  auto cli = std::make_unique<httplib::Client>(url);
  cli->set_connection_timeout(opts.timeout);
  cli->set_read_timeout(opts.timeout);
  cli->set_write_timeout(opts.timeout);
  return cli;
}

json parse_body(const std::string& body, const std::string& what) {
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw TransportError(what + ": malformed JSON response: " + e.what());
  }
}

}  // namespace

RemoteBackend::RemoteBackend(std::string base_url, RemoteOptions options)
    : base_url_(std::move(base_url)), options_(options) {
  if (options_.attempts < 1) throw ConfigError("remote backend needs at least one attempt");
  auto backoff = options_.initial_backoff;
  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt < options_.attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    auto cli = make_client(base_url_, options_);
    auto res = cli->Get("/v1/meta");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    json j = parse_body(res->body, "GET /v1/meta");
    try {
      meta_.vocab_size = j.at("vocab_size").get<std::size_t>();
      meta_.eos_token_id = j.at("eos_token_id").get<TokenId>();
      meta_.tokenizer_fingerprint = j.at("tokenizer_fingerprint").get<std::string>();
      meta_.max_context = j.at("max_context").get<std::size_t>();
    } catch (const json::exception& e) {
      throw ValidationError(std::string("GET /v1/meta: ") + e.what());
    }
    validate(meta_);
    return;
  }
  throw ConnectivityError("cannot reach " + base_url_ + " after " +
                          std::to_string(options_.attempts) + " attempts: " + last_error);
}

std::string RemoteBackend::post(const std::string& path, const std::string& body) const {
  auto backoff = options_.initial_backoff;
  std::string last_error;
  for (int attempt = 0; attempt < options_.attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    auto cli = make_client(base_url_, options_);
    auto res = cli->Post(path, body, kJson);
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return res->body;
    if (res->status == 413) {
      throw LengthError("POST " + path + ": context_overflow");
    }
    if (res->status >= 400 && res->status < 500) {
      throw ValidationError("POST " + path + ": HTTP " + std::to_string(res->status) + " " +
                            res->body);
    }
    last_error = "HTTP " + std::to_string(res->status);
  }
  throw TransportError("POST " + path + " to " + base_url_ + " failed after " +
                       std::to_string(options_.attempts) + " attempts: " + last_error);
}

LogitVector RemoteBackend::next_logits(const Session& session) const {
  const json req{{"prompt", session.prompt_text}, {"generated_ids", session.generated_ids}};
  json j = parse_body(post("/v1/logits", req.dump()), "POST /v1/logits");
  LogitVector out;
  try {
    out.scores = j.at("logits").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("POST /v1/logits: ") + e.what());
  }
  validate(out, meta_);
  return out;
}

std::string RemoteBackend::detokenize(std::span<const TokenId> ids) const {
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= meta_.vocab_size) {
      throw ValidationError("token id " + std::to_string(id) + " out of range");
    }
  }
  const json req{{"ids", std::vector<TokenId>(ids.begin(), ids.end())}};
  json j = parse_body(post("/v1/detokenize", req.dump()), "POST /v1/detokenize");
  try {
    return j.at("text").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("POST /v1/detokenize: ") + e.what());
  }
}

struct LogitServer::Impl {
  std::shared_ptr<const Backend> backend;
  httplib::Server server;
};

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(-1, ' ', false, json::error_handler_t::replace), kJson);
}

}  // namespace

LogitServer::LogitServer(std::shared_ptr<const Backend> backend) : impl_(std::make_unique<Impl>()) {
  impl_->backend = std::move(backend);
  auto& srv = impl_->server;
  const Backend* be = impl_->backend.get();

  srv.Get("/v1/meta", [be](const httplib::Request&, httplib::Response& res) {
    const BackendMeta m = be->meta();
    reply(res, 200,
          {{"vocab_size", m.vocab_size},
           {"eos_token_id", m.eos_token_id},
           {"tokenizer_fingerprint", m.tokenizer_fingerprint},
           {"max_context", m.max_context}});
  });

  srv.Post("/v1/logits", [be](const httplib::Request& req, httplib::Response& res) {
    Session session;
    try {
      json body = json::parse(req.body);
      session.prompt_text = body.at("prompt").get<std::string>();
      session.generated_ids = body.at("generated_ids").get<std::vector<TokenId>>();
    } catch (const json::exception& e) {
      reply(res, 400, {{"error", "bad_request"}, {"detail", e.what()}});
      return;
    }
    try {
      reply(res, 200, {{"logits", be->next_logits(session).scores}});
    } catch (const LengthError&) {
      reply(res, 413, {{"error", "context_overflow"}});
    } catch (const ValidationError& e) {
      reply(res, 400, {{"error", "bad_request"}, {"detail", e.what()}});
    }
  });

  srv.Post("/v1/detokenize", [be](const httplib::Request& req, httplib::Response& res) {
    std::vector<TokenId> ids;
    try {
      ids = json::parse(req.body).at("ids").get<std::vector<TokenId>>();
    } catch (const json::exception& e) {
      reply(res, 400, {{"error", "bad_request"}, {"detail", e.what()}});
      return;
    }
    try {
      reply(res, 200, {{"text", be->detokenize(ids)}});
    } catch (const ValidationError& e) {
      reply(res, 400, {{"error", "bad_request"}, {"detail", e.what()}});
    }
  });
}

LogitServer::~LogitServer() { stop(); }

int LogitServer::bind_any_port(const std::string& host) {
  return impl_->server.bind_to_any_port(host);
}

bool LogitServer::bind(const std::string& host, int port) {
  return impl_->server.bind_to_port(host, port);
}

void LogitServer::listen() { impl_->server.listen_after_bind(); }

void LogitServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace idec
