#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <utility>

#include "httplib.h"
#include "json.hpp"
#include "vigil/errors.hpp"
#include "vigil/hash.hpp"
#include "vigil/image_io.hpp"

namespace vigil {

using json = nlohmann::json;

// Moves one JSON request to an endpoint and returns the JSON response.
// Implementations must be safe for concurrent calls.
class Transport {
public:
  virtual ~Transport() = default;
  virtual json post(std::string_view endpoint, const json& body) = 0;
  // Stable description of the backend, recorded in report provenance.
  virtual std::string identity() const = 0;
};

// "/v1/segment" -> "segment"
inline std::string operation_name(std::string_view endpoint) {
  const auto slash = endpoint.rfind('/');
  return std::string(slash == std::string_view::npos ? endpoint : endpoint.substr(slash + 1));
}

// Request JSON with every base64 image replaced by a digest of its decoded
// pixels. Keys are sorted by nlohmann::json, so dump() is canonical.
inline json canonicalize_request(const json& body) {
  json c = body;
  auto digest = [](const json& b64) {
    if (!b64.is_string()) return b64;
    try {
      return json("px:" + pixel_digest(image_from_b64(b64.get<std::string>())));
    } catch (const ValidationError&) {
      return json("raw:" + sha256_hex(b64.get<std::string>()));
    }
  };
  if (c.is_object()) {
    if (auto it = c.find("image_b64"); it != c.end()) *it = digest(*it);
    if (auto it = c.find("images_b64"); it != c.end() && it->is_array())
      for (auto& e : *it) e = digest(e);
  }
  return c;
}

inline std::string request_key(const json& body) { return sha256_hex(canonicalize_request(body).dump()); }

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{250};
  double multiplier = 2.0;
};

// HTTP+JSON backend. Transport errors are retried with exponential
// backoff; protocol errors are not.
class RemoteTransport : public Transport {
public:
  explicit RemoteTransport(std::string url, RetryPolicy retry = {},
                           std::chrono::seconds timeout = std::chrono::seconds(300))
      : url_(std::move(url)), retry_(retry), timeout_(timeout) {
    if (url_.rfind("http://", 0) != 0)
      throw ConfigError("backend URL must start with http:// or replay: (got " + url_ + ")");
    const auto path_start = url_.find('/', 7);
    if (path_start == std::string::npos) {
      host_ = url_;
    } else {
      host_ = url_.substr(0, path_start);
      prefix_ = url_.substr(path_start);
      while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    }
    if (const char* tok = std::getenv("VIGIL_BACKEND_TOKEN"); tok && *tok) token_ = tok;
  }

  json post(std::string_view endpoint, const json& body) override {
    const std::string payload = body.dump();
    auto backoff = retry_.initial_backoff;
    for (int attempt = 0;; ++attempt) {
      try {
        return post_once(prefix_ + std::string(endpoint), payload);
      } catch (const TransportError&) {
        if (attempt >= retry_.max_retries) throw;
        std::this_thread::sleep_for(backoff);
        backoff = std::chrono::milliseconds(
            static_cast<long long>(static_cast<double>(backoff.count()) * retry_.multiplier));
      }
    }
  }

  std::string identity() const override { return url_; }

private:
  json post_once(const std::string& path, const std::string& payload) const {
    httplib::Client cli(host_);
    cli.set_connection_timeout(std::chrono::seconds(10));
    cli.set_read_timeout(timeout_);
    cli.set_write_timeout(timeout_);
    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
    auto res = cli.Post(path, headers, payload, "application/json");
    if (!res)
      throw TransportError("POST " + host_ + path + " failed: " + httplib::to_string(res.error()));
    if (res->status >= 500 || res->status == 408 || res->status == 429)
      throw TransportError("POST " + host_ + path + " returned HTTP " + std::to_string(res->status));
    if (res->status != 200)
      throw ProtocolError("POST " + host_ + path + " returned HTTP " + std::to_string(res->status),
                          res->body);
    try {
      return json::parse(res->body);
    } catch (const json::parse_error&) {
      throw ProtocolError("response from " + path + " is not JSON", res->body);
    }
  }

  std::string url_, host_, prefix_, token_;
  RetryPolicy retry_;
  std::chrono::seconds timeout_;
};

// Canned responses stored as <dir>/<operation>/<request_key>.json.
// Immutable after construction.
class ReplayTransport : public Transport {
public:
  explicit ReplayTransport(const std::filesystem::path& dir) : dir_(dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec))
      throw ConfigError("replay directory does not exist: " + dir.string());
    std::string listing;
    for (const auto& op_dir : std::filesystem::directory_iterator(dir)) {
      if (!op_dir.is_directory()) continue;
      const auto op = op_dir.path().filename().string();
      for (const auto& f : std::filesystem::directory_iterator(op_dir.path())) {
        if (f.path().extension() != ".json") continue;
        std::ifstream in(f.path());
        try {
          responses_[{op, f.path().stem().string()}] = json::parse(in);
        } catch (const json::parse_error& e) {
          throw ConfigError("bad replay fixture " + f.path().string() + ": " + e.what());
        }
      }
    }
    for (const auto& [k, v] : responses_) listing += k.first + "/" + k.second + "\n";
    fingerprint_ = sha256_hex(listing).substr(0, 16);
  }

  json post(std::string_view endpoint, const json& body) override {
    const auto op = operation_name(endpoint);
    const auto key = request_key(body);
    auto it = responses_.find({op, key});
    if (it == responses_.end())
      throw ProtocolError("no replay fixture for " + op + " request " + key, body.dump().substr(0, 512));
    return it->second;
  }

  std::string identity() const override { return "replay:" + fingerprint_; }
  std::size_t size() const { return responses_.size(); }

private:
  std::filesystem::path dir_;
  std::map<std::pair<std::string, std::string>, json> responses_;
  std::string fingerprint_;
};

// Memoizes responses by (operation, request key). Identical requests reach
// the inner transport once; writes are idempotent.
class CachingTransport : public Transport {
public:
  explicit CachingTransport(std::shared_ptr<Transport> inner) : inner_(std::move(inner)) {}

  json post(std::string_view endpoint, const json& body) override {
    const auto key = operation_name(endpoint) + "/" + request_key(body);
    {
      std::lock_guard lock(mu_);
      if (auto it = cache_.find(key); it != cache_.end()) {
        ++hits_;
        return it->second;
      }
    }
    json r = inner_->post(endpoint, body);
    std::lock_guard lock(mu_);
    ++misses_;
    cache_.emplace(key, r);
    return r;
  }

  std::string identity() const override { return inner_->identity(); }

  std::size_t hits() const {
    std::lock_guard lock(mu_);
    return hits_;
  }
  std::size_t misses() const {
    std::lock_guard lock(mu_);
    return misses_;
  }

private:
  std::shared_ptr<Transport> inner_;
  mutable std::mutex mu_;
  std::map<std::string, json> cache_;
  std::size_t hits_ = 0, misses_ = 0;
};

// Forwards to an inner transport and writes every response in the replay
// layout, so a live session can be replayed later.
class RecordingTransport : public Transport {
public:
  RecordingTransport(std::shared_ptr<Transport> inner, std::filesystem::path dir)
      : inner_(std::move(inner)), dir_(std::move(dir)) {}

  json post(std::string_view endpoint, const json& body) override {
    json r = inner_->post(endpoint, body);
    const auto op = operation_name(endpoint);
    const auto path = dir_ / op / (request_key(body) + ".json");
    std::lock_guard lock(mu_);
    std::filesystem::create_directories(path.parent_path());
    std::ofstream(path) << r.dump(1) << "\n";
    return r;
  }

  std::string identity() const override { return inner_->identity(); }

private:
  std::shared_ptr<Transport> inner_;
  std::filesystem::path dir_;
  std::mutex mu_;
};

// "replay:<dir>" or "http://host:port[/prefix]".
inline std::shared_ptr<Transport> make_transport(const std::string& url, RetryPolicy retry = {}) {
  if (url.rfind("replay:", 0) == 0) return std::make_shared<ReplayTransport>(url.substr(7));
  return std::make_shared<RemoteTransport>(url, retry);
}

}  // namespace vigil
