#pragma once

#include <cstdint>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "activeseg/active_loop.hpp"
#include "activeseg/forest.hpp"

namespace httplib {
class Server;
}

namespace activeseg {

/// Failures the HTTP layer maps onto status codes.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

struct CreateRequest {
  std::string graph_text;           // file contents
  std::string format = "jsonl";     // jsonl | csv
  nlohmann::json config = nlohmann::json::object();
  bool auto_seed = false;           // answer the seed batch from groundtruth
};

CreateRequest parse_create_request(const nlohmann::json& body);

/// Holds every live session. Each session has one writer at a time; a
/// submitted batch is applied immediately and the next round is computed on
/// a copy so status stays readable while phase is "computing".
class SessionStore {
 public:
  /// Empty data_dir disables persistence. With synchronous set, submit()
  /// returns only after the next batch is ready.
  explicit SessionStore(std::filesystem::path data_dir = {}, bool synchronous = false);
  ~SessionStore();
  SessionStore(const SessionStore&) = delete;
  SessionStore& operator=(const SessionStore&) = delete;

  std::string create(const CreateRequest& request);
  nlohmann::json queries(const std::string& id);
  nlohmann::json submit(const std::string& id, const nlohmann::json& body);
  nlohmann::json status(const std::string& id);
  nlohmann::json finalize(const std::string& id);
  nlohmann::json model(const std::string& id);

  /// Blocks until no round computation is running for the session.
  void wait_idle(const std::string& id);
  std::size_t size() const;

  /// Loads every snapshot under data_dir; returns the number restored.
  std::size_t load_all();

 private:
  struct Entry;
  std::shared_ptr<Entry> find(const std::string& id) const;
  void persist(const std::string& id, Entry& entry);
  void launch_round(const std::string& id, const std::shared_ptr<Entry>& entry);

  std::filesystem::path data_dir_;
  bool synchronous_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

/// Answers parsed from {"labels": {"id": ±1, ...}} or [{"id":..,"label":..}].
std::map<EdgeId, Label> parse_answers(const nlohmann::json& labels);

void register_routes(httplib::Server& server, SessionStore& store);

/// Runs the HTTP service until the process is stopped.
int serve(const std::string& host, int port, const std::filesystem::path& data_dir);

}  // namespace activeseg
