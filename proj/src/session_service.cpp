#include "activeseg/session_service.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <httplib.h>

#include "activeseg/errors.hpp"
#include "activeseg/graph_io.hpp"
#include "activeseg/replay.hpp"

namespace activeseg {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::int64_t now_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

std::string new_session_id() {
  std::random_device rd;
  const std::uint64_t v = (std::uint64_t{rd()} << 32) ^ rd();
  char buf[20];
  std::snprintf(buf, sizeof buf, "s%012llx", static_cast<unsigned long long>(v & 0xffffffffffffULL));
  return buf;
}

void write_atomically(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

struct SessionStore::Entry {
  std::mutex mutex;
  std::shared_ptr<const RegionGraph> graph;
  std::shared_ptr<const AffinityGraph> affinity;
  std::vector<double> standardized;
  std::optional<ActiveSession> session;
  std::optional<ForestModel> model;
  std::shared_future<void> work;
  std::string error;  // last failed round computation
  std::int64_t created = 0;
  std::int64_t updated = 0;
};

CreateRequest parse_create_request(const json& body) {
  if (!body.is_object()) throw ServiceError(400, "request body must be a JSON object");
  CreateRequest req;
  if (!body.contains("graph") || !body["graph"].is_string())
    throw ServiceError(422, "field 'graph' must hold the graph file contents as a string");
  req.graph_text = body["graph"].get<std::string>();
  if (body.contains("format")) req.format = body["format"].get<std::string>();
  if (body.contains("config")) {
    if (!body["config"].is_object()) throw ServiceError(422, "field 'config' must be an object");
    req.config = body["config"];
  }
  if (body.contains("auto_seed")) req.auto_seed = body["auto_seed"].get<bool>();
  return req;
}

std::map<EdgeId, Label> parse_answers(const json& labels) {
  std::map<EdgeId, Label> out;
  auto add = [&](EdgeId id, const json& y) {
    if (!y.is_number_integer()) throw ServiceError(422, "label for edge " + std::to_string(id) + " must be -1 or +1");
    const auto v = y.get<std::int64_t>();
    if (v != 1 && v != -1) throw ServiceError(422, "label for edge " + std::to_string(id) + " must be -1 or +1");
    if (!out.emplace(id, static_cast<Label>(v)).second)
      throw ServiceError(422, "edge " + std::to_string(id) + " answered twice");
  };
  if (labels.is_object()) {
    for (const auto& [key, y] : labels.items()) {
      EdgeId id = 0;
      try {
        std::size_t used = 0;
        id = std::stoll(key, &used);
        if (used != key.size()) throw std::invalid_argument(key);
      } catch (const std::exception&) {
        throw ServiceError(422, "edge id '" + key + "' is not an integer");
      }
      add(id, y);
    }
  } else if (labels.is_array()) {
    for (const auto& item : labels) {
      if (!item.is_object() || !item.contains("id") || !item["id"].is_number_integer() || !item.contains("label"))
        throw ServiceError(422, "each answer needs an integer 'id' and a 'label'");
      add(item["id"].get<EdgeId>(), item["label"]);
    }
  } else {
    throw ServiceError(422, "field 'labels' must be an object or an array");
  }
  return out;
}

SessionStore::SessionStore(fs::path data_dir, bool synchronous)
    : data_dir_(std::move(data_dir)), synchronous_(synchronous) {
  if (!data_dir_.empty()) fs::create_directories(data_dir_);
}

SessionStore::~SessionStore() {
  std::map<std::string, std::shared_ptr<Entry>> all;
  {
    std::lock_guard lock(mutex_);
    all = sessions_;
  }
  for (auto& [id, entry] : all) {
    std::shared_future<void> f;
    {
      std::lock_guard lock(entry->mutex);
      f = entry->work;
    }
    if (f.valid()) f.wait();
  }
}

std::shared_ptr<SessionStore::Entry> SessionStore::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "unknown session " + id);
  return it->second;
}

std::size_t SessionStore::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

// Caller holds entry.mutex.
void SessionStore::persist(const std::string& id, Entry& entry) {
  entry.updated = now_seconds();
  if (data_dir_.empty()) return;
  const fs::path dir = data_dir_ / id;
  fs::create_directories(dir);
  json doc = {{"created", entry.created}, {"updated", entry.updated}, {"snapshot", entry.session->snapshot()}};
  write_atomically(dir / "session.json", doc.dump());
  if (entry.model) write_atomically(dir / "model.json", json(*entry.model).dump());
}

// Caller holds entry->mutex; the session is in the computing phase.
void SessionStore::launch_round(const std::string& id, const std::shared_ptr<Entry>& entry) {
  entry->error.clear();
  if (synchronous_) {
    try {
      entry->session->advance();
    } catch (const std::exception& e) {
      entry->error = e.what();
    }
    persist(id, *entry);
    return;
  }
  ActiveSession work = *entry->session;
  entry->work = std::async(std::launch::async, [this, id, entry, work = std::move(work)]() mutable {
    std::string error;
    try {
      work.advance();
    } catch (const std::exception& e) {
      error = e.what();
    }
    std::lock_guard lock(entry->mutex);
    if (error.empty()) {
      entry->session = std::move(work);
    } else {
      entry->error = error;
    }
    try {
      persist(id, *entry);
    } catch (const std::exception& e) {
      entry->error = e.what();
    }
  }).share();
}

std::string SessionStore::create(const CreateRequest& request) {
  GraphFormat format;
  try {
    format = parse_graph_format(request.format);
  } catch (const std::exception& e) {
    throw ServiceError(422, e.what());
  }
  auto entry = std::make_shared<Entry>();
  LoopConfig config;
  try {
    std::istringstream in(request.graph_text);
    entry->graph = std::make_shared<const RegionGraph>(read_region_graph(in, format));
    config = request.config.get<LoopConfig>();
    config.validate(entry->graph->edge_count());
  } catch (const json::exception& e) {
    throw ServiceError(422, std::string("invalid config: ") + e.what());
  } catch (const std::exception& e) {
    throw ServiceError(422, e.what());
  }
  if (request.auto_seed && !entry->graph->has_edge_labels())
    throw ServiceError(422, "auto_seed needs a true_label on every edge");

  entry->affinity = std::make_shared<const AffinityGraph>(build_session_affinity(*entry->graph, config));
  entry->standardized = standardized_features(*entry->graph);
  entry->created = entry->updated = now_seconds();
  try {
    entry->session.emplace(entry->graph, entry->affinity, config);
  } catch (const std::exception& e) {
    throw ServiceError(422, e.what());
  }

  std::string id;
  {
    std::lock_guard lock(mutex_);
    do id = new_session_id();
    while (sessions_.count(id));
    sessions_[id] = entry;
  }
  std::lock_guard lock(entry->mutex);
  if (!data_dir_.empty()) {
    fs::create_directories(data_dir_ / id);
    save_region_graph(data_dir_ / id / "graph.jsonl", *entry->graph, GraphFormat::jsonl);
  }
  if (request.auto_seed) {
    entry->session->accept(oracle_answers(*entry->graph, *entry->session->pending()));
    persist(id, *entry);
    launch_round(id, entry);
  } else {
    persist(id, *entry);
  }
  return id;
}

json SessionStore::queries(const std::string& id) {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  const auto& s = *entry->session;
  json out = {{"session", id},
              {"phase", to_string(s.phase())},
              {"round", s.round()},
              {"labels_used", s.labels_used()},
              {"budget", s.budget()},
              {"token", nullptr},
              {"queries", json::array()}};
  if (s.phase() != Phase::awaiting_labels || !s.pending()) return out;
  out["token"] = s.pending()->token;
  const std::size_t d = entry->graph->feature_dim();
  for (const auto& v : s.pending_views()) {
    const auto& e = entry->graph->edge(v.id);
    const auto idx = static_cast<std::size_t>(v.id);
    json q = {{"id", v.id},
              {"u", e.u},
              {"v", e.v},
              {"size_u", entry->graph->node(e.u).size},
              {"size_v", entry->graph->node(e.v).size},
              {"features", std::vector<double>(entry->standardized.begin() + static_cast<std::ptrdiff_t>(idx * d),
                                               entry->standardized.begin() + static_cast<std::ptrdiff_t>((idx + 1) * d))},
              {"score", v.score},
              {"h_c", v.h_c ? json(*v.h_c) : json(nullptr)},
              {"y_u", v.y_u ? json(*v.y_u) : json(nullptr)},
              {"R", nullptr}};
    if (v.h_c && v.y_u) {
      const double h = *v.h_c, y = *v.y_u;
      q["R"] = rank_disagreement(std::span<const double>(&h, 1), std::span<const double>(&y, 1)).front();
    }
    out["queries"].push_back(std::move(q));
  }
  return out;
}

json SessionStore::submit(const std::string& id, const json& body) {
  auto entry = find(id);
  if (!body.is_object()) throw ServiceError(400, "request body must be a JSON object");
  if (!body.contains("token") || !body["token"].is_string()) throw ServiceError(422, "field 'token' is required");
  if (!body.contains("labels")) throw ServiceError(422, "field 'labels' is required");
  const auto token = body["token"].get<std::string>();

  std::lock_guard lock(entry->mutex);
  auto& s = *entry->session;
  if (s.phase() == Phase::computing) throw ServiceError(409, "the next batch is still being computed");
  if (s.phase() == Phase::stopped) throw ServiceError(409, "session has stopped");
  if (!s.pending() || s.pending()->token != token) throw ServiceError(409, "stale batch token");
  const auto answers = parse_answers(body["labels"]);
  try {
    s.accept(answers);
  } catch (const PreconditionError& e) {
    throw ServiceError(422, e.what());
  }
  persist(id, *entry);
  launch_round(id, entry);
  return {{"session", id},
          {"accepted", answers.size()},
          {"labels_used", entry->session->labels_used()},
          {"phase", to_string(entry->session->phase())}};
}

json SessionStore::status(const std::string& id) {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  const auto& s = *entry->session;
  json out = {{"session", id},
              {"phase", to_string(s.phase())},
              {"round", s.round()},
              {"labels_used", s.labels_used()},
              {"budget", s.budget()},
              {"edges", entry->graph->edge_count()},
              {"strategy", to_string(s.config().strategy)},
              {"stop", to_string(s.stop_status())},
              {"trace", trace_to_json(s.trace())},
              {"finalized", entry->model.has_value()},
              {"created", entry->created},
              {"updated", entry->updated},
              {"error", entry->error.empty() ? json(nullptr) : json(entry->error)}};
  return out;
}

json SessionStore::finalize(const std::string& id) {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  if (entry->session->phase() == Phase::computing) throw ServiceError(409, "the next batch is still being computed");
  try {
    entry->model = entry->session->final_model();
  } catch (const DegenerateTrainingError& e) {
    throw ServiceError(422, e.what());
  }
  persist(id, *entry);
  return {{"session", id}, {"labels_used", entry->session->labels_used()}, {"model", json(*entry->model)}};
}

json SessionStore::model(const std::string& id) {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  if (!entry->model) throw ServiceError(409, "session has not been finalized");
  return json(*entry->model);
}

void SessionStore::wait_idle(const std::string& id) {
  auto entry = find(id);
  std::shared_future<void> f;
  {
    std::lock_guard lock(entry->mutex);
    f = entry->work;
  }
  if (f.valid()) f.wait();
}

std::size_t SessionStore::load_all() {
  if (data_dir_.empty() || !fs::exists(data_dir_)) return 0;
  std::size_t restored = 0;
  for (const auto& dir : fs::directory_iterator(data_dir_)) {
    const fs::path snap_path = dir.path() / "session.json";
    if (!dir.is_directory() || !fs::exists(snap_path)) continue;
    const std::string id = dir.path().filename().string();
    auto entry = std::make_shared<Entry>();
    try {
      const json doc = json::parse(read_file(snap_path));
      entry->graph = std::make_shared<const RegionGraph>(load_region_graph(dir.path() / "graph.jsonl", GraphFormat::jsonl));
      const auto config = doc.at("snapshot").at("config").get<LoopConfig>();
      entry->affinity = std::make_shared<const AffinityGraph>(build_session_affinity(*entry->graph, config));
      entry->standardized = standardized_features(*entry->graph);
      entry->session.emplace(ActiveSession::restore(entry->graph, entry->affinity, doc.at("snapshot")));
      entry->created = doc.at("created").get<std::int64_t>();
      entry->updated = doc.at("updated").get<std::int64_t>();
      if (fs::exists(dir.path() / "model.json"))
        entry->model = json::parse(read_file(dir.path() / "model.json")).get<ForestModel>();
    } catch (const std::exception& e) {
      std::cerr << "skipping session " << id << ": " << e.what() << "\n";
      continue;
    }
    std::lock_guard lock(mutex_);
    sessions_[id] = entry;
    ++restored;
  }
  return restored;
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename F>
httplib::Server::Handler guarded(F&& f) {
  return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      send_json(res, 200, f(req));
    } catch (const ServiceError& e) {
      send_json(res, e.status(), {{"error", e.what()}});
    } catch (const json::exception& e) {
      send_json(res, 400, {{"error", std::string("malformed JSON: ") + e.what()}});
    } catch (const std::exception& e) {
      send_json(res, 500, {{"error", e.what()}});
    }
  };
}

}  // namespace

void register_routes(httplib::Server& server, SessionStore& store) {
  server.Post("/sessions", guarded([&](const httplib::Request& req) {
    const auto id = store.create(parse_create_request(json::parse(req.body)));
    return store.status(id);
  }));
  server.Get(R"(/sessions/([^/]+)/queries)",
             guarded([&](const httplib::Request& req) { return store.queries(req.matches[1]); }));
  server.Post(R"(/sessions/([^/]+)/labels)", guarded([&](const httplib::Request& req) {
    const std::string id = req.matches[1];
    store.status(id);  // unknown session wins over a malformed body
    return store.submit(id, json::parse(req.body));
  }));
  server.Get(R"(/sessions/([^/]+)/status)",
             guarded([&](const httplib::Request& req) { return store.status(req.matches[1]); }));
  server.Post(R"(/sessions/([^/]+)/finalize)",
              guarded([&](const httplib::Request& req) { return store.finalize(req.matches[1]); }));
  server.Get(R"(/sessions/([^/]+)/model)",
             guarded([&](const httplib::Request& req) { return store.model(req.matches[1]); }));
}

int serve(const std::string& host, int port, const fs::path& data_dir) {
  SessionStore store(data_dir);
  const auto restored = store.load_all();
  httplib::Server server;
  register_routes(server, store);
  std::cerr << "activeseg: serving on " << host << ":" << port;
  if (!data_dir.empty()) std::cerr << " (data in " << data_dir.string() << ", " << restored << " sessions restored)";
  std::cerr << "\n";
  return server.listen(host, port) ? 0 : 1;
}

}  // namespace activeseg
