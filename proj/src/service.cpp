#include "hyre/service.hpp"

#include <chrono>
#include <condition_variable>
#include <map>
#include <mutex>
#include <optional>
#include <vector>

#include "httplib.h"

#include "hyre/term_match.hpp"

namespace hyre {

namespace {

using nlohmann::json;

std::uint32_t to_u32(const json& v, const char* field) {
  if (!v.is_number_unsigned())
    throw ValidationError(std::string("'") + field +
                          "' must be an unsigned integer");
  const auto raw = v.get<std::uint64_t>();
  if (raw > 0xffffffffull)
    throw ValidationError(std::string("'") + field + "' out of range");
  return static_cast<std::uint32_t>(raw);
}

}  // namespace

HybridQuery parse_query_json(const FrozenIndex& index, const json& j,
                             std::uint32_t default_k) {
  if (!j.is_object()) throw ValidationError("request must be a JSON object");
  HybridQuery q;
  q.k = default_k;
  if (j.contains("clauses")) {
    const auto& clauses = j.at("clauses");
    if (!clauses.is_object())
      throw ValidationError("'clauses' must be an object");
    std::map<std::uint32_t, std::vector<std::uint32_t>> raw;
    for (const auto& [name, ids] : clauses.items()) {
      const int slot = index.resolve_clause_slot(name);
      if (slot < 0)
        throw ValidationError("unknown clause slot '" + name + "'");
      if (!ids.is_array())
        throw ValidationError("clause '" + name + "' must be an array");
      auto& list = raw[static_cast<std::uint32_t>(slot)];
      for (const auto& v : ids) list.push_back(to_u32(v, name.c_str()));
    }
    q.terms = normalize_query(raw, index.num_clauses());
  }
  if (j.contains("embedding")) {
    const auto& emb = j.at("embedding");
    if (!emb.is_array()) throw ValidationError("'embedding' must be an array");
    auto& vec = q.embedding.emplace();
    vec.reserve(emb.size());
    for (const auto& v : emb) {
      if (!v.is_number())
        throw ValidationError("'embedding' entries must be numbers");
      vec.push_back(static_cast<float>(v.get<double>()));
    }
  }
  if (j.contains("k")) q.k = to_u32(j.at("k"), "k");
  if (j.contains("options")) {
    const auto& opt = j.at("options");
    if (!opt.is_object()) throw ValidationError("'options' must be an object");
    if (opt.contains("quant")) {
      if (!opt.at("quant").is_boolean())
        throw ValidationError("'quant' must be a boolean");
      q.options.quant_enabled = opt.at("quant").get<bool>();
    }
    if (opt.contains("quantK"))
      q.options.quant_k = to_u32(opt.at("quantK"), "quantK");
    if (opt.contains("granularity"))
      q.options.granularity = to_u32(opt.at("granularity"), "granularity");
  }
  return q;
}

json result_to_json(const TopKResult& result) {
  json hits = json::array();
  for (const auto& h : result.hits)
    hits.push_back({{"docId", h.doc_id}, {"score", h.score}});
  return {{"results", hits}};
}

json timings_to_json(const StageTimings& t) {
  return {{"tbrMs", t.tbr_ms},
          {"quantMs", t.quant_ms},
          {"ebrMs", t.ebr_ms},
          {"topkMs", t.topk_ms},
          {"totalMs", t.total_ms}};
}

// Fixed set of executors handed to requests one at a time; callers block
// until one frees up, which caps concurrent scratch memory at
// workers * (numDocs * maxBatch).
class SearchService::ExecutorPool {
 public:
  ExecutorPool(const FrozenIndex& index, std::uint32_t workers,
               std::uint32_t max_batch) {
    if (workers < 1) throw ValidationError("workers must be >= 1");
    for (std::uint32_t i = 0; i < workers; ++i)
      free_.push_back(std::make_unique<Executor>(index, max_batch));
  }

  class Lease {
   public:
    Lease(ExecutorPool& pool, std::unique_ptr<Executor> exec)
        : pool_(pool), exec_(std::move(exec)) {}
    ~Lease() { pool_.put(std::move(exec_)); }
    Executor& operator*() { return *exec_; }
    Executor* operator->() { return exec_.get(); }

   private:
    ExecutorPool& pool_;
    std::unique_ptr<Executor> exec_;
  };

  Lease acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return !free_.empty(); });
    auto exec = std::move(free_.back());
    free_.pop_back();
    return Lease(*this, std::move(exec));
  }

 private:
  void put(std::unique_ptr<Executor> exec) {
    {
      std::lock_guard lock(mu_);
      free_.push_back(std::move(exec));
    }
    cv_.notify_one();
  }

  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::unique_ptr<Executor>> free_;
};

SearchService::SearchService(FrozenIndex index, ServiceConfig config)
    : index_(std::move(index)),
      config_(std::move(config)),
      pool_(std::make_unique<ExecutorPool>(index_, config_.workers,
                                           config_.max_batch)) {}

SearchService::~SearchService() { stop(); }

void SearchService::handle_search(const std::string& body, int& status,
                                  std::string& response) {
  json parsed;
  try {
    parsed = json::parse(body);
  } catch (const json::exception& e) {
    status = 400;
    response = json{{"error", std::string("malformed JSON: ") + e.what()}}
                   .dump();
    return;
  }

  try {
    if (parsed.is_array()) {
      if (parsed.empty()) throw ValidationError("batch is empty");
      if (parsed.size() > config_.max_batch)
        throw ValidationError("batch size " + std::to_string(parsed.size()) +
                              " exceeds maxBatch " +
                              std::to_string(config_.max_batch));
      // An element that fails to parse owns its error slot; the rest still
      // execute together as one batch.
      const std::size_t n = parsed.size();
      std::vector<std::optional<std::string>> parse_errors(n);
      BatchRequest batch;
      std::vector<std::size_t> original_pos;
      for (std::size_t i = 0; i < n; ++i) {
        try {
          batch.queries.push_back(
              parse_query_json(index_, parsed[i], config_.default_k));
          original_pos.push_back(i);
        } catch (const ValidationError& e) {
          parse_errors[i] = e.what();
        }
      }
      StageTimings timings;
      std::vector<QueryOutcome> outcomes;
      if (!batch.queries.empty()) {
        auto exec = pool_->acquire();
        outcomes = exec->execute_batch(batch, &timings);
      }
      json responses = json::array();
      responses.get_ref<json::array_t&>().resize(n);
      for (std::size_t i = 0; i < n; ++i)
        if (parse_errors[i]) responses[i] = {{"error", *parse_errors[i]}};
      for (std::size_t b = 0; b < outcomes.size(); ++b) {
        const auto& outcome = outcomes[b];
        responses[original_pos[b]] =
            outcome.ok ? result_to_json(outcome.result)
                       : json{{"error", outcome.error}};
      }
      status = 200;
      response =
          json{{"responses", responses}, {"timings", timings_to_json(timings)}}
              .dump();
    } else {
      const HybridQuery query =
          parse_query_json(index_, parsed, config_.default_k);
      StageTimings timings;
      TopKResult result;
      {
        auto exec = pool_->acquire();
        result = exec->execute(query, &timings);
      }
      json out = result_to_json(result);
      out["timings"] = timings_to_json(timings);
      status = 200;
      response = out.dump();
    }
  } catch (const ValidationError& e) {
    status = 400;
    response = json{{"error", e.what()}}.dump();
  } catch (const std::exception& e) {
    status = 500;
    response = json{{"error", e.what()}}.dump();
  }
}

int SearchService::start() {
  server_ = std::make_unique<httplib::Server>();
  server_->Post("/search", [this](const httplib::Request& req,
                                  httplib::Response& res) {
    int status = 200;
    std::string body;
    handle_search(req.body, status, body);
    res.status = status;
    res.set_content(body, "application/json");
  });

  if (config_.port == 0) {
    port_ = server_->bind_to_any_port(config_.host);
    if (port_ <= 0) throw std::runtime_error("cannot bind ephemeral port");
  } else {
    if (!server_->bind_to_port(config_.host, config_.port))
      throw std::runtime_error("cannot bind " + config_.host + ":" +
                               std::to_string(config_.port));
    port_ = config_.port;
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  while (!server_->is_running())
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  return port_;
}

void SearchService::wait() {
  if (thread_.joinable()) thread_.join();
}

void SearchService::stop() {
  if (server_ && thread_.joinable()) {
    server_->stop();
    thread_.join();
  }
}

}  // namespace hyre
