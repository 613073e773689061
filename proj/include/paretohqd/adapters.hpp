#pragma once

// External scorer / generator / trainer adapters.
//
// Wire format, one JSON object per line in subprocess mode and JSON arrays
// of the same objects in HTTP mode (POST /score, /generate, /train):
//   score     {"id","prompt","response"}            -> {"id","rewards":[...]}
//   generate  {"id","prompt"}                       -> {"id","response"}
//   train     {"preference","train_file","stage","hyperparameters"}
//                                                   -> {"status":"ok"|"error",...}

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "paretohqd/core.hpp"

namespace paretohqd {

enum class AdapterKind { kScore, kGenerate, kTrain };

std::string_view to_string(AdapterKind k);

/// Answers a batch of wire requests with one response each, in order.
/// Throws AdapterError on transport failure.
class Adapter {
 public:
  virtual ~Adapter() = default;
  virtual std::vector<json> call(std::span<const json> requests) = 0;
};

using AdapterFactory = std::function<std::unique_ptr<Adapter>()>;

/// Child process spoken to over stdin/stdout, one line per request.
/// The command runs under /bin/sh -c.
class SubprocessAdapter : public Adapter {
 public:
  SubprocessAdapter(std::string command, std::chrono::milliseconds timeout);
  ~SubprocessAdapter() override;
  SubprocessAdapter(const SubprocessAdapter&) = delete;
  SubprocessAdapter& operator=(const SubprocessAdapter&) = delete;

  std::vector<json> call(std::span<const json> requests) override;

 private:
  void start();
  void stop();
  std::string read_line();

  std::string command_;
  std::chrono::milliseconds timeout_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

/// POSTs the whole batch as a JSON array to `<base_url>/<kind>`.
class HttpAdapter : public Adapter {
 public:
  HttpAdapter(std::string base_url, AdapterKind kind,
              std::chrono::milliseconds timeout);
  std::vector<json> call(std::span<const json> requests) override;

 private:
  std::string base_url_;
  AdapterKind kind_;
  std::chrono::milliseconds timeout_;
};

/// In-process adapter answering each request with a function.
class FunctionAdapter : public Adapter {
 public:
  explicit FunctionAdapter(std::function<json(const json&)> fn)
      : fn_(std::move(fn)) {}
  std::vector<json> call(std::span<const json> requests) override;

 private:
  std::function<json(const json&)> fn_;
};

/// Every adapter exchange of a run, keyed by channel and request. Thread
/// safe. Serialized sorted by (channel, request text) so the file does not
/// depend on call scheduling.
class AdapterLog {
 public:
  void record(const std::string& channel, const json& request,
              const json& response);
  std::optional<json> lookup(const std::string& channel,
                             const json& request) const;
  std::size_t count(const std::string& channel) const;
  std::size_t size() const;
  /// Adds every exchange of `other`.
  void absorb(const AdapterLog& other);

  void write(std::ostream& out) const;
  /// Adds the exchanges of a log written by write().
  void load(std::istream& in);

 private:
  mutable std::mutex mutex_;
  std::map<std::pair<std::string, std::string>, json> entries_;
  std::map<std::string, std::size_t> calls_;
};

/// Forwards to `inner` and records each exchange under `channel`.
class LoggingAdapter : public Adapter {
 public:
  LoggingAdapter(std::unique_ptr<Adapter> inner, std::string channel,
                 AdapterLog& log)
      : inner_(std::move(inner)), channel_(std::move(channel)), log_(log) {}
  std::vector<json> call(std::span<const json> requests) override;

 private:
  std::unique_ptr<Adapter> inner_;
  std::string channel_;
  AdapterLog& log_;
};

/// Serves responses from a recorded log; a request missing from the log is
/// an AdapterError.
class ReplayAdapter : public Adapter {
 public:
  ReplayAdapter(const AdapterLog& log, std::string channel)
      : log_(log), channel_(std::move(channel)) {}
  std::vector<json> call(std::span<const json> requests) override;

 private:
  const AdapterLog& log_;
  std::string channel_;
};

enum class AdapterMode { kNone, kToy, kSubprocess, kHttp };

std::string_view to_string(AdapterMode m);
AdapterMode adapter_mode_from_string(std::string_view s);

/// Where an adapter lives and how it is driven. `command` and `url` may hold
/// `{rep}`, `{train_file}` and `{seed}` placeholders.
struct AdapterEndpoint {
  AdapterMode mode = AdapterMode::kNone;
  std::string command;
  std::string url;
  std::int64_t timeout_ms = 30000;
  std::size_t batch_size = 32;
  std::size_t retries = 3;
  std::size_t max_in_flight = 1;

  bool configured() const { return mode != AdapterMode::kNone; }
};

json endpoint_to_json(const AdapterEndpoint& e);
AdapterEndpoint endpoint_from_json(const json& j);

std::string substitute_placeholders(
    std::string text, const std::map<std::string, std::string>& values);

/// Adapter for a subprocess or HTTP endpoint. Toy and none modes are
/// resolved by the caller.
std::unique_ptr<Adapter> make_external_adapter(const AdapterEndpoint& e,
                                               AdapterKind kind);

struct BatchOptions {
  std::size_t batch_size = 32;
  std::size_t retries = 3;
  std::size_t max_in_flight = 1;
};

inline BatchOptions batch_options(const AdapterEndpoint& e) {
  return {e.batch_size, e.retries, e.max_in_flight};
}

/// Sends `requests` in batches through adapters from `factory`, at most
/// `max_in_flight` at once. A failed batch gets a fresh adapter and is retried
/// up to `retries` times. `on_batch` runs (serialized) after each successful
/// batch with its first request index and responses. Returns responses in
/// request order.
std::vector<json> call_batched(
    const AdapterFactory& factory, std::span<const json> requests,
    const BatchOptions& options,
    const std::function<void(std::size_t, std::span<const json>)>& on_batch =
        {});

json make_score_request(const ScoredExample& ex);
json make_generate_request(const std::string& id, const std::string& prompt);
json make_train_request(const PreferenceVector& w, const std::string& train_file,
                        int stage, const json& hyperparameters);

/// Validates a scorer response for `expected_id` and arity M.
RewardVector parse_score_response(const json& response,
                                  const std::string& expected_id,
                                  std::size_t objective_count);
std::string parse_generate_response(const json& response,
                                    const std::string& expected_id);
void check_train_response(const json& response);

}  // namespace paretohqd
