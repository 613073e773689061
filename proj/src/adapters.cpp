#include "paretohqd/adapters.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <exception>
#include <istream>
#include <ostream>
#include <thread>

#include <httplib.h>

extern char** environ;

namespace paretohqd {

std::string_view to_string(AdapterKind k) {
  switch (k) {
    case AdapterKind::kScore:
      return "score";
    case AdapterKind::kGenerate:
      return "generate";
    case AdapterKind::kTrain:
      return "train";
  }
  return "score";
}

std::string_view to_string(AdapterMode m) {
  switch (m) {
    case AdapterMode::kNone:
      return "none";
    case AdapterMode::kToy:
      return "toy";
    case AdapterMode::kSubprocess:
      return "subprocess";
    case AdapterMode::kHttp:
      return "http";
  }
  return "none";
}

AdapterMode adapter_mode_from_string(std::string_view s) {
  if (s == "none") return AdapterMode::kNone;
  if (s == "toy") return AdapterMode::kToy;
  if (s == "subprocess") return AdapterMode::kSubprocess;
  if (s == "http") return AdapterMode::kHttp;
  throw ConfigError("unknown adapter mode '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Subprocess

SubprocessAdapter::SubprocessAdapter(std::string command,
                                     std::chrono::milliseconds timeout)
    : command_(std::move(command)), timeout_(timeout) {
  // A dead child must surface as EPIPE, not kill the orchestrator.
  ::signal(SIGPIPE, SIG_IGN);
  start();
}

SubprocessAdapter::~SubprocessAdapter() { stop(); }

void SubprocessAdapter::start() {
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw AdapterError("pipe failed");
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw AdapterError("pipe failed");
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
  std::string sh = "/bin/sh";
  std::string dash_c = "-c";
  char* argv[] = {sh.data(), dash_c.data(), command_.data(), nullptr};
  // Own process group, so stop() also reaches whatever the shell started.
  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);
  pid_t pid = -1;
  const int rc = ::posix_spawn(&pid, "/bin/sh", &actions, &attr, argv, environ);
  posix_spawnattr_destroy(&attr);
  posix_spawn_file_actions_destroy(&actions);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  if (rc != 0) {
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    throw AdapterError("cannot spawn adapter '" + command_ + "': " + std::strerror(rc));
  }
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

void SubprocessAdapter::stop() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ <= 0) return;
  for (int i = 0; i < 50; ++i) {
    int status = 0;
    if (::waitpid(pid_, &status, WNOHANG) == pid_) {
      ::kill(-pid_, SIGKILL);
      pid_ = -1;
      return;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  ::kill(-pid_, SIGKILL);
  int status = 0;
  ::waitpid(pid_, &status, 0);
  pid_ = -1;
}

std::string SubprocessAdapter::read_line() {
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  for (;;) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw AdapterError("adapter timed out: " + command_);
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (ready < 0 && errno == EINTR) continue;
    if (ready <= 0) throw AdapterError("adapter timed out: " + command_);
    char chunk[4096];
    const ssize_t got = ::read(from_child_, chunk, sizeof(chunk));
    if (got < 0 && errno == EINTR) continue;
    if (got <= 0) throw AdapterError("adapter exited: " + command_);
    buffer_.append(chunk, static_cast<std::size_t>(got));
  }
}

std::vector<json> SubprocessAdapter::call(std::span<const json> requests) {
  std::vector<json> out;
  out.reserve(requests.size());
  for (const auto& req : requests) {
    const std::string line = req.dump() + "\n";
    std::size_t written = 0;
    while (written < line.size()) {
      const ssize_t n = ::write(to_child_, line.data() + written, line.size() - written);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw AdapterError("adapter closed its input: " + command_);
      written += static_cast<std::size_t>(n);
    }
    const std::string reply = read_line();
    try {
      out.push_back(json::parse(reply));
    } catch (const json::parse_error&) {
      throw AdapterError("malformed adapter response: " + reply);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// HTTP

HttpAdapter::HttpAdapter(std::string base_url, AdapterKind kind,
                         std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), kind_(kind), timeout_(timeout) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

std::vector<json> HttpAdapter::call(std::span<const json> requests) {
  // Split "scheme://host:port/prefix" into client base and path prefix.
  const auto scheme_end = base_url_.find("://");
  const auto path_start =
      base_url_.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  const std::string host = base_url_.substr(0, path_start);
  const std::string prefix =
      path_start == std::string::npos ? "" : base_url_.substr(path_start);

  httplib::Client client(host);
  const auto secs = timeout_.count() / 1000;
  const auto usecs = (timeout_.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  json body = json::array();
  for (const auto& r : requests) body.push_back(r);
  const std::string path = prefix + "/" + std::string(to_string(kind_));
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    throw AdapterError("HTTP " + path + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw AdapterError("HTTP " + path + " returned status " + std::to_string(res->status));
  }
  json reply;
  try {
    reply = json::parse(res->body);
  } catch (const json::parse_error&) {
    throw AdapterError("malformed HTTP response from " + path);
  }
  if (!reply.is_array() || reply.size() != requests.size()) {
    throw AdapterError("HTTP " + path + " must answer with one element per request");
  }
  return std::vector<json>(reply.begin(), reply.end());
}

// ---------------------------------------------------------------------------
// In-process, logging and replay

std::vector<json> FunctionAdapter::call(std::span<const json> requests) {
  std::vector<json> out;
  out.reserve(requests.size());
  for (const auto& r : requests) out.push_back(fn_(r));
  return out;
}

void AdapterLog::record(const std::string& channel, const json& request,
                        const json& response) {
  std::lock_guard lock(mutex_);
  entries_[{channel, request.dump()}] = response;
  ++calls_[channel];
}

std::optional<json> AdapterLog::lookup(const std::string& channel,
                                       const json& request) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find({channel, request.dump()});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::size_t AdapterLog::count(const std::string& channel) const {
  std::lock_guard lock(mutex_);
  auto it = calls_.find(channel);
  return it == calls_.end() ? 0 : it->second;
}

std::size_t AdapterLog::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

void AdapterLog::absorb(const AdapterLog& other) {
  if (&other == this) return;
  std::scoped_lock lock(mutex_, other.mutex_);
  for (const auto& [key, response] : other.entries_) entries_[key] = response;
  for (const auto& [channel, n] : other.calls_) calls_[channel] += n;
}

void AdapterLog::write(std::ostream& out) const {
  std::lock_guard lock(mutex_);
  for (const auto& [key, response] : entries_) {
    json line;
    line["channel"] = key.first;
    line["request"] = json::parse(key.second);
    line["response"] = response;
    out << line.dump() << '\n';
  }
}

void AdapterLog::load(std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    record(j.at("channel").get<std::string>(), j.at("request"), j.at("response"));
  }
}

std::vector<json> LoggingAdapter::call(std::span<const json> requests) {
  auto out = inner_->call(requests);
  for (std::size_t i = 0; i < requests.size() && i < out.size(); ++i) {
    log_.record(channel_, requests[i], out[i]);
  }
  return out;
}

std::vector<json> ReplayAdapter::call(std::span<const json> requests) {
  std::vector<json> out;
  out.reserve(requests.size());
  for (const auto& r : requests) {
    auto hit = log_.lookup(channel_, r);
    if (!hit) throw AdapterError("request not in adapter log (" + channel_ + "): " + r.dump());
    out.push_back(std::move(*hit));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Endpoints

json endpoint_to_json(const AdapterEndpoint& e) {
  json j;
  j["mode"] = to_string(e.mode);
  j["command"] = e.command;
  j["url"] = e.url;
  j["timeout_ms"] = e.timeout_ms;
  j["batch_size"] = e.batch_size;
  j["retries"] = e.retries;
  j["max_in_flight"] = e.max_in_flight;
  return j;
}

AdapterEndpoint endpoint_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("adapter endpoint must be an object");
  AdapterEndpoint e;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& key = it.key();
    if (key == "mode") {
      e.mode = adapter_mode_from_string(it->get<std::string>());
    } else if (key == "command") {
      e.command = it->get<std::string>();
    } else if (key == "url") {
      e.url = it->get<std::string>();
    } else if (key == "timeout_ms") {
      e.timeout_ms = it->get<std::int64_t>();
    } else if (key == "batch_size") {
      e.batch_size = it->get<std::size_t>();
    } else if (key == "retries") {
      e.retries = it->get<std::size_t>();
    } else if (key == "max_in_flight") {
      e.max_in_flight = it->get<std::size_t>();
    } else {
      throw ConfigError("unknown adapter key '" + key + "'");
    }
  }
  if (e.batch_size == 0) throw ConfigError("adapter batch_size must be positive");
  if (e.max_in_flight == 0) throw ConfigError("adapter max_in_flight must be positive");
  if (e.timeout_ms <= 0) throw ConfigError("adapter timeout_ms must be positive");
  if (e.mode == AdapterMode::kSubprocess && e.command.empty()) {
    throw ConfigError("subprocess adapter needs a command");
  }
  if (e.mode == AdapterMode::kHttp && e.url.empty()) throw ConfigError("http adapter needs a url");
  return e;
}

std::string substitute_placeholders(std::string text,
                                    const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    const std::string token = "{" + key + "}";
    for (auto pos = text.find(token); pos != std::string::npos;
         pos = text.find(token, pos + value.size())) {
      text.replace(pos, token.size(), value);
    }
  }
  return text;
}

std::unique_ptr<Adapter> make_external_adapter(const AdapterEndpoint& e,
                                               AdapterKind kind) {
  const std::chrono::milliseconds timeout(e.timeout_ms);
  switch (e.mode) {
    case AdapterMode::kSubprocess:
      return std::make_unique<SubprocessAdapter>(e.command, timeout);
    case AdapterMode::kHttp:
      return std::make_unique<HttpAdapter>(e.url, kind, timeout);
    default:
      throw ConfigError("adapter mode '" + std::string(to_string(e.mode)) +
                        "' is not an external endpoint");
  }
}

// ---------------------------------------------------------------------------
// Batching

std::vector<json> call_batched(
    const AdapterFactory& factory, std::span<const json> requests,
    const BatchOptions& options,
    const std::function<void(std::size_t, std::span<const json>)>& on_batch) {
  std::vector<json> responses(requests.size());
  if (requests.empty()) return responses;
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  const std::size_t batches = (requests.size() + batch - 1) / batch;

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex mutex;
  std::exception_ptr first_error;

  auto worker = [&] {
    std::unique_ptr<Adapter> adapter;
    try {
      for (;;) {
        if (failed) return;
        const std::size_t b = next++;
        if (b >= batches) return;
        const std::size_t begin = b * batch;
        const std::size_t end = std::min(requests.size(), begin + batch);
        const auto slice = requests.subspan(begin, end - begin);
        std::vector<json> got;
        for (std::size_t attempt = 0;; ++attempt) {
          try {
            if (!adapter) adapter = factory();
            got = adapter->call(slice);
            if (got.size() != slice.size()) {
              throw AdapterError("adapter answered " + std::to_string(got.size()) +
                                 " of " + std::to_string(slice.size()) + " requests");
            }
            break;
          } catch (const AdapterError&) {
            adapter.reset();
            if (attempt >= options.retries) throw;
          }
        }
        std::lock_guard lock(mutex);
        for (std::size_t i = 0; i < got.size(); ++i) responses[begin + i] = got[i];
        if (on_batch) on_batch(begin, got);
      }
    } catch (...) {
      std::lock_guard lock(mutex);
      if (!first_error) first_error = std::current_exception();
      failed = true;
    }
  };

  const std::size_t workers = std::min(std::max<std::size_t>(1, options.max_in_flight), batches);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return responses;
}

// ---------------------------------------------------------------------------
// Typed requests

json make_score_request(const ScoredExample& ex) {
  json j;
  j["id"] = ex.id;
  j["prompt"] = ex.prompt;
  j["response"] = ex.response;
  return j;
}

json make_generate_request(const std::string& id, const std::string& prompt) {
  json j;
  j["id"] = id;
  j["prompt"] = prompt;
  return j;
}

json make_train_request(const PreferenceVector& w, const std::string& train_file,
                        int stage, const json& hyperparameters) {
  json j;
  j["preference"] = std::vector<double>(w.weights().begin(), w.weights().end());
  j["train_file"] = train_file;
  j["stage"] = stage;
  j["hyperparameters"] = hyperparameters;
  return j;
}

RewardVector parse_score_response(const json& response, const std::string& expected_id,
                                  std::size_t objective_count) {
  if (!response.is_object() || !response.contains("id") ||
      response["id"] != expected_id) {
    throw AdapterError("scorer response does not match id '" + expected_id + "'");
  }
  const auto it = response.find("rewards");
  if (it == response.end() || !it->is_array()) {
    throw AdapterError("scorer response for '" + expected_id + "' has no rewards");
  }
  if (it->size() != objective_count) {
    throw ArityError("scorer returned " + std::to_string(it->size()) + " rewards for id '" +
                     expected_id + "', expected " + std::to_string(objective_count));
  }
  std::vector<double> values;
  for (const auto& v : *it) {
    if (!v.is_number()) throw DataError("non-numeric reward for id '" + expected_id + "'");
    values.push_back(v.get<double>());
  }
  try {
    return RewardVector(std::move(values));
  } catch (const DataError&) {
    throw DataError("non-finite reward for id '" + expected_id + "'");
  }
}

std::string parse_generate_response(const json& response, const std::string& expected_id) {
  if (!response.is_object() || !response.contains("id") ||
      response["id"] != expected_id) {
    throw AdapterError("generator response does not match id '" + expected_id + "'");
  }
  const auto it = response.find("response");
  if (it == response.end() || !it->is_string()) {
    throw AdapterError("generator response for '" + expected_id + "' has no text");
  }
  return it->get<std::string>();
}

void check_train_response(const json& response) {
  const auto it = response.find("status");
  if (it == response.end() || !it->is_string()) {
    throw AdapterError("trainer response has no status");
  }
  if (*it != "ok") throw AdapterError("trainer reported: " + response.dump());
}

}  // namespace paretohqd
