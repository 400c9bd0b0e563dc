#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <random>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast.hpp>
#include <boost/beast/websocket.hpp>

#include "tpkmp/io.hpp"
#include "tpkmp/service.hpp"
#include "tpkmp/session.hpp"

using namespace tpkmp;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
namespace fs = std::filesystem;
using tcp = net::ip::tcp;

namespace {

struct Reply {
  int status = 0;
  Json body;
};

class Client {
 public:
  explicit Client(unsigned short port) : port_(port) {}

  Reply request(http::verb verb, const std::string& target, const Json& body = nullptr) {
    net::io_context ioc;
    beast::tcp_stream stream(ioc);
    stream.connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port_));
    http::request<http::string_body> req{verb, target, 11};
    req.set(http::field::host, "127.0.0.1");
    if (!body.is_null()) {
      req.set(http::field::content_type, "application/json");
      req.body() = body.dump();
    }
    req.prepare_payload();
    http::write(stream, req);
    beast::flat_buffer buf;
    http::response<http::string_body> res;
    http::read(stream, buf, res);
    beast::error_code ec;
    stream.socket().shutdown(tcp::socket::shutdown_both, ec);
    return Reply{static_cast<int>(res.result_int()), res.body().empty() ? Json() : Json::parse(res.body())};
  }

  Reply get(const std::string& t) { return request(http::verb::get, t); }
  Reply post(const std::string& t, const Json& b = Json::object()) { return request(http::verb::post, t, b); }

 private:
  unsigned short port_;
};

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("tpkmp_service_" + std::to_string(std::random_device{}()));
    ServiceOptions opt;
    opt.port = 0;
    opt.data_dir = dir_;
    service_ = std::make_unique<Service>(opt);
    service_->start();
    client_ = std::make_unique<Client>(service_->port());
  }

  void TearDown() override {
    service_.reset();
    fs::remove_all(dir_);
  }

  std::string trained_model() {
    const Json sc{{"kind", "pick_place"}, {"seed", 0}, {"train", Json{{"components", 6}, {"inputs", 100}}}};
    const Reply s = client_->post("/scenarios", sc);
    EXPECT_EQ(s.status, 201);
    EXPECT_EQ(s.body.at("config_hash").get<std::string>().size(), 16u);
    const Reply m = client_->post("/models/train", Json{{"scenario_id", s.body.at("id")}});
    EXPECT_EQ(m.status, 201);
    return m.body.at("id").get<std::string>();
  }

  Json wait_done(const std::string& sid) {
    for (int i = 0; i < 500; ++i) {
      const Reply r = client_->get("/sessions/" + sid);
      if (r.body.at("done").get<bool>()) return r.body;
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    ADD_FAILURE() << "session did not finish";
    return {};
  }

  fs::path dir_;
  std::unique_ptr<Service> service_;
  std::unique_ptr<Client> client_;
};

}  // namespace

TEST_F(ServiceTest, TrainPersistsSchemaModel) {
  const std::string mid = trained_model();
  const Reply r = client_->get("/models/" + mid);
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body.at("locals").size(), 2u);
  EXPECT_TRUE(r.body.at("locals")[0].contains("via_points"));
  const TpModel disk = load_model(dir_ / "models" / (mid + ".json"));
  EXPECT_EQ(dump_model(model_from_json(r.body)), dump_model(disk));
  EXPECT_TRUE(fs::exists(dir_ / "scenarios"));
}

TEST_F(ServiceTest, ErrorsMapToStatusCodes) {
  EXPECT_EQ(client_->get("/nowhere").status, 404);
  EXPECT_EQ(client_->get("/models/m999").status, 404);
  EXPECT_EQ(client_->post("/models/train", Json{{"scenario_id", "sc999"}}).status, 404);
  EXPECT_EQ(client_->post("/scenarios", Json{{"kind", "juggling"}}).status, 400);
  EXPECT_EQ(client_->post("/sessions", Json::object()).status, 400);
  EXPECT_EQ(client_->get("/sessions/s42").status, 404);

  net::io_context ioc;
  beast::tcp_stream stream(ioc);
  stream.connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), service_->port()));
  http::request<http::string_body> req{http::verb::post, "/scenarios", 11};
  req.body() = "{not json";
  req.prepare_payload();
  http::write(stream, req);
  beast::flat_buffer buf;
  http::response<http::string_body> res;
  http::read(stream, buf, res);
  EXPECT_EQ(res.result_int(), 400u);
}

TEST_F(ServiceTest, PortInUseFailsToBind) {
  ServiceOptions opt;
  opt.port = service_->port();
  opt.data_dir = dir_;
  Service other(opt);
  EXPECT_THROW(other.start(), std::system_error);
}

TEST_F(ServiceTest, WebSocketForceAppearsWithinTwoSteps) {
  const std::string mid = trained_model();
  const Reply s = client_->post("/sessions", Json{{"model_id", mid}, {"cfg", Json{{"s_end", 0.5}}}});
  ASSERT_EQ(s.status, 201);
  const std::string sid = s.body.at("id");

  net::io_context ioc;
  websocket::stream<tcp::socket> ws(ioc);
  ws.next_layer().connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), service_->port()));
  ws.handshake("127.0.0.1", "/sessions/" + sid + "/live");

  ASSERT_EQ(client_->post("/sessions/" + sid + "/start").status, 200);
  EXPECT_EQ(client_->post("/sessions/" + sid + "/start").status, 409);

  beast::flat_buffer buf;
  const auto read = [&] {
    buf.clear();
    ws.read(buf);
    return Json::parse(beast::buffers_to_string(buf.data()));
  };
  Json m;
  do {
    m = read();
  } while (m.at("type") != "state" || m.at("s").get<double>() < 0.05);
  EXPECT_EQ(m.at("F")[1].get<double>(), 0.0);
  EXPECT_EQ(m.at("frames").size(), 2u);

  ws.text(true);
  ws.write(net::buffer(Json{{"type", "force"}, {"F", {0.0, 25.0}}}.dump()));
  bool seen = false;
  for (int i = 0; i < 400 && !seen; ++i) {
    m = read();
    if (m.at("type") == "state" && m.at("F")[1].get<double>() != 0.0) seen = true;
  }
  EXPECT_TRUE(seen);

  ws.write(net::buffer(R"({"type":"force","F":[1,2,3]})"));
  bool error = false;
  for (int i = 0; i < 400 && !error; ++i) error = read().at("type") == "error";
  EXPECT_TRUE(error);

  ASSERT_EQ(client_->post("/sessions/" + sid + "/pause").status, 200);
  const Json log = client_->get("/sessions/" + sid + "/log").body;
  std::size_t before = 0;
  bool found = false;
  for (const auto& e : log.at("events")) {
    if (e.at("type") == "advance") before += e.at("steps").get<std::size_t>();
    if (e.at("type") == "force") {
      found = true;
      break;
    }
  }
  ASSERT_TRUE(found);
  const Json tr = client_->get("/sessions/" + sid + "/trace?from=" + std::to_string(before)).body;
  ASSERT_GE(tr.at("rows").size(), 2u);
  const auto& rows = tr.at("rows");
  EXPECT_GT(std::abs(rows[0].at("F")[1].get<double>()) + std::abs(rows[1].at("F")[1].get<double>()), 0.0);
  const Json earlier = client_->get("/sessions/" + sid + "/trace?from=" + std::to_string(before - 1)).body;
  EXPECT_EQ(earlier.at("rows")[0].at("F")[1].get<double>(), 0.0);

  beast::error_code ec;
  ws.close(websocket::close_code::normal, ec);
}

TEST_F(ServiceTest, SessionLogReplaysToSameModel) {
  const std::string mid = trained_model();
  const Json body{{"model_id", mid},
                  {"cfg", Json{{"s_end", 0.3}, {"trigger", Json{{"mode", "button"}}}}},
                  {"speed", 8.0}};
  const Reply s = client_->post("/sessions", body);
  ASSERT_EQ(s.status, 201);
  const std::string sid = s.body.at("id");
  EXPECT_EQ(client_->post("/sessions/" + sid + "/events", Json{{"type", "button"}, {"pressed", true}}).status, 202);
  EXPECT_EQ(client_->post("/sessions/" + sid + "/events", Json{{"type", "drag"}, {"target", {0.3, 0.3}}}).status, 202);
  EXPECT_EQ(client_->post("/sessions/" + sid + "/events", Json{{"kind", "x"}}).status, 400);
  ASSERT_EQ(client_->post("/sessions/" + sid + "/start").status, 200);
  std::this_thread::sleep_for(std::chrono::milliseconds(60));
  client_->post("/sessions/" + sid + "/events", Json{{"type", "button"}, {"pressed", true}});
  const Json status = wait_done(sid);
  ASSERT_EQ(status.at("snapshots").size(), 2u);
  EXPECT_GE(status.at("committed_via_points").get<int>(), 1);
  EXPECT_EQ(client_->post("/sessions/" + sid + "/start").status, 409);

  const std::string final_id = status.at("snapshots")[1];
  const TpModel served = model_from_json(client_->get("/models/" + final_id).body);
  const TpModel base = model_from_json(client_->get("/models/" + mid).body);
  const Json log = client_->get("/sessions/" + sid + "/log").body;
  const Session again = replay(base, log);
  EXPECT_EQ(dump_model(again.model()), dump_model(served));
  EXPECT_TRUE(fs::exists(dir_ / "sessions" / (sid + ".json")));

  const Reply reset = client_->post("/sessions/" + sid + "/reset");
  EXPECT_EQ(reset.status, 200);
  EXPECT_FALSE(reset.body.at("done").get<bool>());
  EXPECT_EQ(reset.body.at("episode").get<int>(), 2);
  EXPECT_EQ(client_->post("/sessions/" + sid + "/start").status, 200);
}
