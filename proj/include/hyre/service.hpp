#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <thread>

#include "json.hpp"

#include "hyre/corpus.hpp"
#include "hyre/pipeline.hpp"

namespace httplib {
class Server;
}

namespace hyre {

struct ServiceConfig {
  std::string index_path;
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 binds an ephemeral port
  std::uint32_t max_batch = 16;
  std::uint32_t workers = 2;
  std::uint32_t default_k = 10;
};

// Request body -> query. {"clauses": {name: [ids]}, "embedding": [...],
// "k": n, "options": {"quant": bool, "quantK": n, "granularity": n}}.
// Malformed shapes raise ValidationError with the offending field named.
HybridQuery parse_query_json(const FrozenIndex& index,
                             const nlohmann::json& j,
                             std::uint32_t default_k);

nlohmann::json result_to_json(const TopKResult& result);
nlohmann::json timings_to_json(const StageTimings& timings);

// POST /search; a JSON object is one query, a JSON array is a batch (answered
// in request order, one result or error object per element). Work is
// serialized through a fixed pool of executors, one per worker, so scratch
// buffers never migrate between concurrent requests.
class SearchService {
 public:
  SearchService(FrozenIndex index, ServiceConfig config);
  ~SearchService();
  SearchService(const SearchService&) = delete;
  SearchService& operator=(const SearchService&) = delete;

  int start();  // serves on a background thread; returns the bound port
  void wait();  // blocks until the server stops
  void stop();
  int port() const { return port_; }
  const FrozenIndex& index() const { return index_; }

 private:
  class ExecutorPool;
  void handle_search(const std::string& body, int& status,
                     std::string& response);

  FrozenIndex index_;
  ServiceConfig config_;
  std::unique_ptr<ExecutorPool> pool_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace hyre
