#include "tpkmp/service.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast.hpp>
#include <boost/beast/websocket.hpp>

#include "tpkmp/errors.hpp"
#include "tpkmp/session.hpp"

namespace tpkmp {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
namespace fs = std::filesystem;
using tcp = net::ip::tcp;

namespace {

struct HttpError : std::runtime_error {
  http::status status;
  HttpError(http::status s, const std::string& what) : std::runtime_error(what), status(s) {}
};

HttpError not_found(const std::string& what) { return HttpError(http::status::not_found, what); }

std::string text(const Json& j) { return j.dump(); }

class LiveSession;

/// Scenarios, models and sessions by id. Models are immutable once registered.
class Registry {
 public:
  explicit Registry(fs::path dir) : dir_(std::move(dir)) {}

  void load_existing() {
    const fs::path models = dir_ / "models";
    if (!fs::exists(models)) return;
    for (const auto& e : fs::directory_iterator(models)) {
      if (e.path().extension() != ".json") continue;
      try {
        auto m = std::make_shared<const TpModel>(load_model(e.path()));
        std::lock_guard lk(m_);
        models_[e.path().stem().string()] = std::move(m);
      } catch (const std::exception&) {
        // unreadable model files are skipped
      }
    }
  }

  std::string add_scenario(Scenario sc) {
    std::lock_guard lk(m_);
    const std::string id = fresh("sc", scenarios_);
    write_scenario(dir_ / "scenarios" / id, sc);
    scenarios_.emplace(id, std::make_shared<const Scenario>(std::move(sc)));
    return id;
  }

  std::shared_ptr<const Scenario> scenario(const std::string& id) const {
    std::lock_guard lk(m_);
    const auto it = scenarios_.find(id);
    if (it == scenarios_.end()) throw not_found("unknown scenario '" + id + "'");
    return it->second;
  }

  std::string add_model(TpModel model, const std::string& scenario_id) {
    auto m = std::make_shared<const TpModel>(std::move(model));
    std::lock_guard lk(m_);
    std::string id = fresh("m", models_);
    while (fs::exists(dir_ / "models" / (id + ".json"))) {
      models_[id] = nullptr;
      id = fresh("m", models_);
    }
    save_model(dir_ / "models" / (id + ".json"), *m);
    models_[id] = std::move(m);
    if (!scenario_id.empty()) model_scenario_[id] = scenario_id;
    return id;
  }

  std::shared_ptr<const TpModel> model(const std::string& id) const {
    std::lock_guard lk(m_);
    const auto it = models_.find(id);
    if (it == models_.end() || !it->second) throw not_found("unknown model '" + id + "'");
    return it->second;
  }

  std::string scenario_of(const std::string& model_id) const {
    std::lock_guard lk(m_);
    const auto it = model_scenario_.find(model_id);
    return it == model_scenario_.end() ? std::string() : it->second;
  }

  Json model_ids() const {
    std::lock_guard lk(m_);
    Json out = Json::array();
    for (const auto& [id, m] : models_) {
      if (m) out.push_back(id);
    }
    return out;
  }

  std::string add_session(std::shared_ptr<LiveSession> s, std::string id) {
    std::lock_guard lk(m_);
    sessions_[id] = std::move(s);
    return id;
  }

  std::string next_session_id() {
    std::lock_guard lk(m_);
    return "s" + std::to_string(++session_counter_);
  }

  std::shared_ptr<LiveSession> session(const std::string& id) const {
    std::lock_guard lk(m_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw not_found("unknown session '" + id + "'");
    return it->second;
  }

  std::vector<std::shared_ptr<LiveSession>> sessions() const {
    std::lock_guard lk(m_);
    std::vector<std::shared_ptr<LiveSession>> out;
    for (const auto& [id, s] : sessions_) out.push_back(s);
    return out;
  }

  const fs::path& dir() const noexcept { return dir_; }

 private:
  template <class Map>
  std::string fresh(const char* prefix, const Map& map) {
    std::string id;
    do {
      id = prefix + std::to_string(++counter_);
    } while (map.count(id));
    return id;
  }

  fs::path dir_;
  mutable std::mutex m_;
  std::size_t counter_ = 0;
  std::size_t session_counter_ = 0;
  std::map<std::string, std::shared_ptr<const Scenario>> scenarios_;
  std::map<std::string, std::shared_ptr<const TpModel>> models_;
  std::map<std::string, std::string> model_scenario_;
  std::map<std::string, std::shared_ptr<LiveSession>> sessions_;
};

class WsConn : public std::enable_shared_from_this<WsConn> {
 public:
  WsConn(tcp::socket&& socket, std::shared_ptr<LiveSession> session)
      : ws_(std::move(socket)), session_(std::move(session)) {}

  void run(http::request<http::string_body> req);
  void send(std::shared_ptr<const std::string> msg);
  bool closed() const noexcept { return closed_; }

 private:
  void on_accept(beast::error_code ec);
  void do_read();
  void on_read(beast::error_code ec, std::size_t);
  void do_write();
  void on_write(beast::error_code ec, std::size_t);

  websocket::stream<beast::tcp_stream> ws_;
  std::shared_ptr<LiveSession> session_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> out_;
  std::atomic<bool> closed_{false};
};

/// Owns a Session and the thread that steps it in (scaled) real time. Events
/// from handlers go through a queue drained by that thread before each step.
class LiveSession : public std::enable_shared_from_this<LiveSession> {
 public:
  LiveSession(std::string id, std::string model_id, std::string scenario_id, Session session, double speed,
              Registry& registry)
      : id_(std::move(id)),
        scenario_id_(std::move(scenario_id)),
        session_(std::move(session)),
        speed_(speed),
        registry_(registry) {
    snapshot_ids_.push_back(std::move(model_id));
  }

  ~LiveSession() { shutdown(); }

  void launch() {
    thread_ = std::thread([self = shared_from_this()] { self->loop(); });
  }

  void shutdown() {
    {
      std::lock_guard lk(m_);
      stop_ = true;
    }
    cv_.notify_all();
    if (thread_.joinable() && thread_.get_id() != std::this_thread::get_id()) thread_.join();
    if (thread_.joinable()) thread_.detach();
  }

  /// With `wait`, returns once the loop has applied the event.
  void enqueue(Json e, bool wait = false) {
    std::unique_lock lk(m_);
    queue_.push_back(std::move(e));
    const std::size_t ticket = ++enqueued_;
    cv_.notify_all();
    if (wait) done_cv_.wait(lk, [&] { return stop_ || applied_ >= ticket; });
  }

  void start() {
    std::lock_guard lk(m_);
    if (running_) throw HttpError(http::status::conflict, "session is already running");
    if (session_.done()) throw HttpError(http::status::conflict, "episode finished; reset first");
    running_ = true;
    t0_ = std::chrono::steady_clock::now();
    stepped_ = 0;
    cv_.notify_all();
  }

  void pause() {
    std::lock_guard lk(m_);
    running_ = false;
  }

  Json status() {
    std::lock_guard lk(m_);
    return Json{{"id", id_},
                {"model_id", snapshot_ids_.front()},
                {"snapshots", snapshot_ids_},
                {"running", running_},
                {"done", session_.done()},
                {"episode", session_.episode()},
                {"step", session_.step()},
                {"steps", session_.steps()},
                {"pending_via_points", session_.pending().size()},
                {"committed_via_points", session_.committed().size()},
                {"speed", speed_}};
  }

  Json trace_from(std::size_t k) {
    std::lock_guard lk(m_);
    const auto& tr = session_.trace();
    Json rows = Json::array();
    for (std::size_t i = k; i < tr.size(); ++i) rows.push_back(to_json(tr[i]));
    return Json{{"episode", session_.episode()}, {"from", k}, {"rows", rows}};
  }

  Json log() {
    std::lock_guard lk(m_);
    return session_.log();
  }

  void subscribe(const std::shared_ptr<WsConn>& c) {
    std::lock_guard lk(m_);
    subscribers_.push_back(c);
  }

 private:
  void loop() {
    using namespace std::chrono;
    constexpr std::size_t kMaxBurst = 200;
    while (true) {
      std::vector<std::string> out;
      std::vector<std::weak_ptr<WsConn>> subs;
      {
        std::unique_lock lk(m_);
        cv_.wait_for(lk, milliseconds(2), [&] { return stop_ || !queue_.empty(); });
        if (stop_) {
          done_cv_.notify_all();
          return;
        }
        while (!queue_.empty()) {
          Json e = std::move(queue_.front());
          queue_.pop_front();
          ++applied_;
          try {
            session_.apply(e);
            if (e.at("type") == "reset") running_ = false;
          } catch (const std::exception& ex) {
            out.push_back(text(Json{{"type", "error"}, {"message", ex.what()}}));
          }
        }
        if (running_) {
          const double elapsed = duration<double>(steady_clock::now() - t0_).count();
          const auto due = static_cast<std::size_t>(elapsed * session_.config().rate_hz * speed_);
          if (due > stepped_ + kMaxBurst) stepped_ = due - kMaxBurst;
          while (stepped_ < due && !session_.done()) {
            const std::size_t before = session_.pending().size();
            session_.advance(1);
            ++stepped_;
            if (session_.done()) break;
            out.push_back(text(session_.state_message(session_.trace().back())));
            const auto& pending = session_.pending();
            for (std::size_t i = before; i < pending.size(); ++i) {
              Json vp = to_json(pending[i]);
              vp["type"] = "via_point";
              out.push_back(text(vp));
            }
          }
          if (session_.done()) {
            running_ = false;
            out.push_back(text(session_.state_message(session_.trace().back())));
            out.push_back(text(Json{{"type", "finished"}, {"episode", session_.episode()}}));
          }
        }
        publish_snapshots(out);
        subs = subscribers_;
      }
      done_cv_.notify_all();
      if (!out.empty()) broadcast(out, subs);
    }
  }

  void publish_snapshots(std::vector<std::string>& out) {
    bool fresh = false;
    while (snapshot_ids_.size() < session_.snapshots().size()) {
      const std::string id = registry_.add_model(session_.snapshots()[snapshot_ids_.size()], scenario_id_);
      snapshot_ids_.push_back(id);
      out.push_back(text(Json{{"type", "model"}, {"id", id}, {"snapshot", snapshot_ids_.size() - 1}}));
      fresh = true;
    }
    if (fresh) write_json(registry_.dir() / "sessions" / (id_ + ".json"), session_.log());
  }

  void broadcast(const std::vector<std::string>& out, const std::vector<std::weak_ptr<WsConn>>& subs) {
    bool stale = false;
    for (const auto& w : subs) {
      const auto c = w.lock();
      if (!c || c->closed()) {
        stale = true;
        continue;
      }
      for (const auto& msg : out) c->send(std::make_shared<const std::string>(msg));
    }
    if (stale) {
      std::lock_guard lk(m_);
      std::erase_if(subscribers_, [](const std::weak_ptr<WsConn>& w) {
        const auto c = w.lock();
        return !c || c->closed();
      });
    }
  }

  std::string id_;
  std::string scenario_id_;
  std::vector<std::string> snapshot_ids_;
  Session session_;
  double speed_;
  Registry& registry_;

  std::mutex m_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  std::deque<Json> queue_;
  std::size_t enqueued_ = 0;
  std::size_t applied_ = 0;
  std::vector<std::weak_ptr<WsConn>> subscribers_;
  bool running_ = false;
  bool stop_ = false;
  std::chrono::steady_clock::time_point t0_;
  std::size_t stepped_ = 0;
  std::thread thread_;
};

void WsConn::run(http::request<http::string_body> req) {
  ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
  ws_.async_accept(req, beast::bind_front_handler(&WsConn::on_accept, shared_from_this()));
}

void WsConn::on_accept(beast::error_code ec) {
  if (ec) {
    closed_ = true;
    return;
  }
  session_->subscribe(shared_from_this());
  do_read();
}

void WsConn::do_read() { ws_.async_read(buffer_, beast::bind_front_handler(&WsConn::on_read, shared_from_this())); }

void WsConn::on_read(beast::error_code ec, std::size_t) {
  if (ec) {
    closed_ = true;
    return;
  }
  const std::string msg = beast::buffers_to_string(buffer_.data());
  buffer_.consume(buffer_.size());
  try {
    Json e = Json::parse(msg);
    if (!e.is_object() || !e.contains("type") || !e.at("type").is_string()) {
      throw ValidationError("event needs a string 'type'");
    }
    session_->enqueue(std::move(e));
  } catch (const std::exception& ex) {
    send(std::make_shared<const std::string>(text(Json{{"type", "error"}, {"message", ex.what()}})));
  }
  do_read();
}

void WsConn::send(std::shared_ptr<const std::string> msg) {
  net::post(ws_.get_executor(), [self = shared_from_this(), msg = std::move(msg)] {
    if (self->closed_ || self->out_.size() > 4096) return;  // slow client: drop
    self->out_.push_back(msg);
    if (self->out_.size() == 1) self->do_write();
  });
}

void WsConn::do_write() {
  ws_.text(true);
  ws_.async_write(net::buffer(*out_.front()), beast::bind_front_handler(&WsConn::on_write, shared_from_this()));
}

void WsConn::on_write(beast::error_code ec, std::size_t) {
  if (ec) {
    closed_ = true;
    out_.clear();
    return;
  }
  out_.pop_front();
  if (!out_.empty()) do_write();
}

struct Target {
  std::vector<std::string> path;
  std::map<std::string, std::string> query;
};

Target parse_target(std::string_view t) {
  Target out;
  const auto q = t.find('?');
  std::string_view path = t.substr(0, q);
  if (q != std::string_view::npos) {
    std::string_view rest = t.substr(q + 1);
    while (!rest.empty()) {
      const auto amp = rest.find('&');
      const auto kv = rest.substr(0, amp);
      const auto eq = kv.find('=');
      out.query[std::string(kv.substr(0, eq))] = eq == std::string_view::npos ? "" : std::string(kv.substr(eq + 1));
      if (amp == std::string_view::npos) break;
      rest.remove_prefix(amp + 1);
    }
  }
  while (!path.empty()) {
    while (!path.empty() && path.front() == '/') path.remove_prefix(1);
    const auto slash = path.find('/');
    if (!path.empty()) out.path.emplace_back(path.substr(0, slash));
    if (slash == std::string_view::npos) break;
    path.remove_prefix(slash);
  }
  return out;
}

Json body_json(const http::request<http::string_body>& req) {
  if (req.body().empty()) return Json::object();
  try {
    return Json::parse(req.body());
  } catch (const Json::parse_error& e) {
    throw HttpError(http::status::bad_request, std::string("invalid JSON body: ") + e.what());
  }
}

}  // namespace

struct Service::Impl {
  ServiceOptions opt;
  Registry registry;
  net::io_context ioc;
  tcp::acceptor acceptor;
  net::signal_set signals;
  std::vector<std::thread> threads;
  std::atomic<bool> stopped{false};

  explicit Impl(ServiceOptions o)
      : opt(std::move(o)), registry(opt.data_dir), ioc(std::max(1, opt.threads)), acceptor(ioc), signals(ioc) {}

  std::pair<http::status, Json> route(const http::request<http::string_body>& req) {
    const Target t = parse_target(std::string_view(req.target().data(), req.target().size()));
    const auto& p = t.path;
    const auto method = req.method();
    const auto is = [&](http::verb v, std::initializer_list<const char*> shape) {
      if (method != v || p.size() != shape.size()) return false;
      std::size_t i = 0;
      for (const char* s : shape) {
        if (std::string_view(s) != "*" && p[i] != s) return false;
        ++i;
      }
      return true;
    };

    if (is(http::verb::post, {"scenarios"})) {
      Scenario sc = scenario_from_json(body_json(req), registry.dir());
      const std::string hash = config_hash(sc);
      const std::string id = registry.add_scenario(std::move(sc));
      return {http::status::created, Json{{"id", id}, {"config_hash", hash}}};
    }
    if (is(http::verb::get, {"scenarios", "*"})) {
      const auto sc = registry.scenario(p[1]);
      Json j = scenario_to_json(*sc, false);
      j["config_hash"] = config_hash(*sc);
      return {http::status::ok, j};
    }
    if (is(http::verb::post, {"models", "train"})) {
      const Json b = body_json(req);
      if (!b.contains("scenario_id")) throw ValidationError("scenario_id required");
      const std::string sid = b.at("scenario_id").get<std::string>();
      const auto sc = registry.scenario(sid);
      const std::string id = registry.add_model(train(sc->demos, sc->train), sid);
      return {http::status::created, Json{{"id", id}}};
    }
    if (is(http::verb::get, {"models"})) return {http::status::ok, Json{{"models", registry.model_ids()}}};
    if (is(http::verb::get, {"models", "*"})) return {http::status::ok, model_to_json(*registry.model(p[1]))};
    if (is(http::verb::post, {"sessions"})) return create_session(body_json(req));
    if (p.size() >= 2 && p[0] == "sessions") {
      const auto s = registry.session(p[1]);
      if (is(http::verb::get, {"sessions", "*"})) return {http::status::ok, s->status()};
      if (is(http::verb::post, {"sessions", "*", "start"})) {
        s->start();
        return {http::status::ok, s->status()};
      }
      if (is(http::verb::post, {"sessions", "*", "pause"})) {
        s->pause();
        return {http::status::ok, s->status()};
      }
      if (is(http::verb::post, {"sessions", "*", "reset"})) {
        s->enqueue(Json{{"type", "reset"}}, true);
        return {http::status::ok, s->status()};
      }
      if (is(http::verb::post, {"sessions", "*", "events"})) {
        Json e = body_json(req);
        if (!e.is_object() || !e.contains("type") || !e.at("type").is_string()) {
          throw ValidationError("event needs a string 'type'");
        }
        s->enqueue(std::move(e));
        return {http::status::accepted, Json{{"queued", true}}};
      }
      if (is(http::verb::get, {"sessions", "*", "trace"})) {
        std::size_t from = 0;
        if (const auto it = t.query.find("from"); it != t.query.end()) from = std::stoul(it->second);
        return {http::status::ok, s->trace_from(from)};
      }
      if (is(http::verb::get, {"sessions", "*", "log"})) return {http::status::ok, s->log()};
    }
    throw not_found("no route for " + std::string(req.method_string()) + " " + std::string(req.target()));
  }

  std::pair<http::status, Json> create_session(const Json& b) {
    if (!b.contains("model_id")) throw ValidationError("model_id required");
    const std::string mid = b.at("model_id").get<std::string>();
    const auto model = registry.model(mid);
    const std::string sid = registry.scenario_of(mid);

    EpisodeConfig cfg;
    if (!sid.empty()) {
      const auto sc = registry.scenario(sid);
      cfg.trigger = sc->trigger;
      cfg.stiffness = sc->stiffness;
      cfg.duration_scale = sc->duration_scale;
      cfg.rate_hz = sc->rate_hz;
      cfg.s_end = sc->s_end;
    }
    if (b.contains("cfg")) cfg = episode_config_from_json(b.at("cfg"), cfg);
    std::vector<FramePose> frames = model->frames();
    if (b.contains("frames")) {
      frames.clear();
      for (const auto& f : b.at("frames")) frames.push_back(frame_from_json(f));
    }
    const SessionOptions opts = session_options_from_json(b.value("options", Json::object()));
    const double speed = b.value("speed", 1.0);
    if (!(speed > 0.0)) throw ValidationError("speed must be positive");

    const std::string id = registry.next_session_id();
    auto live = std::make_shared<LiveSession>(id, mid, sid, Session(*model, std::move(frames), cfg, opts), speed,
                                              registry);
    registry.add_session(live, id);
    live->launch();
    return {http::status::created, Json{{"id", id}}};
  }

  http::response<http::string_body> handle(const http::request<http::string_body>& req) {
    http::status status = http::status::ok;
    Json body;
    try {
      std::tie(status, body) = route(req);
    } catch (const HttpError& e) {
      status = e.status;
      body = Json{{"error", e.what()}};
    } catch (const ContractViolation& e) {
      status = http::status::conflict;
      body = Json{{"error", e.what()}};
    } catch (const Error& e) {
      status = http::status::bad_request;
      body = Json{{"error", e.what()}};
    } catch (const Json::exception& e) {
      status = http::status::bad_request;
      body = Json{{"error", e.what()}};
    } catch (const std::invalid_argument& e) {
      status = http::status::bad_request;
      body = Json{{"error", e.what()}};
    } catch (const std::exception& e) {
      status = http::status::internal_server_error;
      body = Json{{"error", e.what()}};
    }
    http::response<http::string_body> res{status, req.version()};
    res.set(http::field::content_type, "application/json");
    res.set(http::field::access_control_allow_origin, "*");
    res.keep_alive(req.keep_alive());
    res.body() = body.dump();
    res.prepare_payload();
    return res;
  }

  std::shared_ptr<LiveSession> live_for(std::string_view target) {
    const Target t = parse_target(target);
    if (t.path.size() != 3 || t.path[0] != "sessions" || t.path[2] != "live") return nullptr;
    try {
      return registry.session(t.path[1]);
    } catch (const HttpError&) {
      return nullptr;
    }
  }

  void do_accept();
};

namespace {

class HttpConn : public std::enable_shared_from_this<HttpConn> {
 public:
  HttpConn(tcp::socket&& socket, Service::Impl& svc) : stream_(std::move(socket)), svc_(svc) {}

  void run() { net::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpConn::do_read, shared_from_this())); }

 private:
  void do_read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(60));
    http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpConn::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec == http::error::end_of_stream) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    if (ec) return;
    if (websocket::is_upgrade(req_)) {
      if (auto live = svc_.live_for(std::string_view(req_.target().data(), req_.target().size()))) {
        stream_.expires_never();
        std::make_shared<WsConn>(stream_.release_socket(), std::move(live))->run(std::move(req_));
        return;
      }
    }
    auto res = std::make_shared<http::response<http::string_body>>(svc_.handle(req_));
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code wec, std::size_t) {
      if (wec) return;
      if (res->need_eof()) {
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, wec);
        return;
      }
      self->do_read();
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  Service::Impl& svc_;
};

}  // namespace

void Service::Impl::do_accept() {
  acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;
    std::make_shared<HttpConn>(std::move(socket), *this)->run();
    do_accept();
  });
}

Service::Service(ServiceOptions opt) : impl_(std::make_unique<Impl>(std::move(opt))) {}

Service::~Service() {
  stop();
  for (auto& t : impl_->threads) {
    if (t.joinable()) t.join();
  }
}

void Service::start() {
  auto& s = *impl_;
  fs::create_directories(s.opt.data_dir);
  s.registry.load_existing();
  const tcp::endpoint ep(net::ip::make_address(s.opt.address), s.opt.port);
  try {
    s.acceptor.open(ep.protocol());
    s.acceptor.set_option(net::socket_base::reuse_address(true));
    s.acceptor.bind(ep);
    s.acceptor.listen(net::socket_base::max_listen_connections);
  } catch (const boost::system::system_error& e) {
    throw std::system_error(static_cast<std::error_code>(e.code()), "cannot listen on " + s.opt.address + ":" +
                                                                        std::to_string(s.opt.port));
  }
  s.do_accept();
  s.signals.add(SIGINT);
  s.signals.add(SIGTERM);
  s.signals.async_wait([this](beast::error_code ec, int) {
    if (!ec) stop();
  });
  for (int i = 0; i < std::max(1, s.opt.threads); ++i) s.threads.emplace_back([&s] { s.ioc.run(); });
}

void Service::stop() {
  auto& s = *impl_;
  if (s.stopped.exchange(true)) return;
  for (const auto& live : s.registry.sessions()) live->shutdown();
  s.ioc.stop();
}

void Service::wait() {
  for (auto& t : impl_->threads) {
    if (t.joinable()) t.join();
  }
}

unsigned short Service::port() const { return impl_->acceptor.local_endpoint().port(); }

}  // namespace tpkmp
