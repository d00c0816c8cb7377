#include "embsim/error.hpp"
#include "embsim/net/protocol.hpp"
#include "embsim/net/server.hpp"
#include "embsim/rng.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <thread>

using namespace embsim;
using namespace embsim::net;
using nlohmann::json;

namespace {

Frame make(std::uint16_t env, MsgType t, std::vector<std::uint8_t> payload = {}) {
  return {env, static_cast<std::uint8_t>(t), std::move(payload)};
}

ServerOptions small_options() {
  ServerOptions o;
  o.defaults = {{"task", "kick_the_ball"}, {"obs", "audio,proprio"}, {"audio_mode", "stereo"}};
  o.max_envs = 2;
  return o;
}

std::vector<std::uint8_t> walk_step(float speed, float turn) {
  const std::vector<Action> a{Action{ActionKind::Walk, {speed, turn}}};
  return encode_actions(a);
}

ErrorMsg expect_error(const std::optional<Frame>& f) {
  EXPECT_TRUE(f.has_value());
  EXPECT_EQ(f->type, static_cast<std::uint8_t>(MsgType::Error));
  return decode_error(f->payload);
}

}  // namespace

TEST(Codec, CloseFrameBytes) {
  const auto bytes = encode_frame(make(0, MsgType::Close));
  EXPECT_EQ(bytes, (std::vector<std::uint8_t>{0x03, 0x00, 0x00, 0x00, 0x00, 0x00, 0x06}));
  const Frame f = decode_exact(bytes);
  EXPECT_EQ(f.env_id, 0);
  EXPECT_EQ(f.type, 6);
  EXPECT_TRUE(f.payload.empty());
}

TEST(Codec, HeaderLayout) {
  const auto bytes = encode_frame(make(0x0102, MsgType::Step, {0xaa, 0xbb}));
  EXPECT_EQ(bytes, (std::vector<std::uint8_t>{0x05, 0, 0, 0, 0x02, 0x01, 0x03, 0xaa, 0xbb}));
}

TEST(Codec, IncompleteAndMismatched) {
  const auto bytes = encode_frame(make(3, MsgType::Reset, encode_reset(42)));
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    EXPECT_EQ(decode_frame(std::span(bytes.data(), n)).status, DecodeResult::Status::Incomplete);
  }
  auto extra = bytes;
  extra.push_back(0);
  EXPECT_THROW(decode_exact(extra), Error);
  EXPECT_THROW(decode_exact(std::span(bytes.data(), bytes.size() - 1)), Error);
  const std::vector<std::uint8_t> short_len{0x02, 0, 0, 0, 0, 0};
  EXPECT_THROW(decode_frame(short_len), Error);
  const std::vector<std::uint8_t> huge{0xff, 0xff, 0xff, 0xff};
  EXPECT_THROW(decode_frame(huge), Error);
}

TEST(Codec, StreamOfFrames) {
  std::vector<std::uint8_t> stream;
  for (std::uint16_t i = 0; i < 5; ++i) {
    const auto b = encode_frame(make(i, MsgType::Reset, encode_reset(i)));
    stream.insert(stream.end(), b.begin(), b.end());
  }
  std::size_t pos = 0;
  for (std::uint16_t i = 0; i < 5; ++i) {
    const auto r = decode_frame(std::span(stream).subspan(pos));
    ASSERT_EQ(r.status, DecodeResult::Status::Complete);
    EXPECT_EQ(r.frame.env_id, i);
    EXPECT_EQ(decode_reset(r.frame.payload), std::optional<std::uint64_t>(i));
    pos += r.consumed;
  }
  EXPECT_EQ(pos, stream.size());
}

TEST(Codec, StepResultRoundTrip) {
  StepResultMsg m;
  ObservationFrame f;
  const std::vector<float> v{1, 2, 3, 4, 5, 6};
  f.add("x", Tensor::from_f32({2, 3}, v));
  m.observations.push_back(f);
  m.rewards = {0.25f};
  m.done = true;
  m.info = R"({"step":1})";
  const auto payload = encode_step_result(m);
  EXPECT_EQ(decode_step_result(payload), m);
  auto bad = payload;
  bad.push_back(0);
  EXPECT_THROW(decode_step_result(bad), Error);
  bad = payload;
  bad.resize(bad.size() - 3);
  EXPECT_THROW(decode_step_result(bad), Error);
}

TEST(Codec, ObservationLayout) {
  ObservationFrame f;
  const std::vector<std::uint8_t> px{7, 8};
  f.add("ab", Tensor::from_u8({2}, px));
  std::vector<std::uint8_t> out;
  encode_observation(f, out);
  EXPECT_EQ(out, (std::vector<std::uint8_t>{1, 0, 2, 0, 'a', 'b', 1, 1, 2, 0, 0, 0, 7, 8}));
}

TEST(Codec, ActionsRoundTripAndErrors) {
  const std::vector<Action> a{Action{ActionKind::Walk, {1.5f, -0.25f}}, Action{ActionKind::Kick, {}},
                              Action{ActionKind::Sound, std::vector<float>(441, 0.1f)}};
  const auto bytes = encode_actions(a);
  const auto back = decode_actions(bytes);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].kind, a[i].kind);
    EXPECT_EQ(back[i].data, a[i].data);
  }
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_actions(truncated), Error);
  EXPECT_THROW(decode_reset(std::vector<std::uint8_t>(3, 0)), Error);
}

TEST(Codec, FuzzRoundTrip) {
  RngStream rng(123, 0);
  for (int i = 0; i < 2000; ++i) {
    Frame f;
    f.env_id = static_cast<std::uint16_t>(rng.uniform_int(65536));
    f.type = static_cast<std::uint8_t>(rng.uniform_int(256));
    f.payload.resize(rng.uniform_int(300));
    for (auto& b : f.payload) b = static_cast<std::uint8_t>(rng.uniform_int(256));
    EXPECT_EQ(decode_exact(encode_frame(f)), f);
  }
}

TEST(Session, StepBeforeResetAndBadIds) {
  Session s(small_options());
  auto e = expect_error(s.handle(make(0, MsgType::Step, walk_step(1, 0))));
  EXPECT_EQ(e.code, static_cast<std::uint16_t>(ErrorCode::NotReset));

  const auto ack = s.handle(make(0, MsgType::Hello));
  ASSERT_TRUE(ack);
  ASSERT_EQ(ack->type, static_cast<std::uint8_t>(MsgType::HelloAck));
  const json doc = json::parse(payload_text(ack->payload));
  EXPECT_EQ(doc["observations"]["audio"]["shape"], json({2, 441}));
  EXPECT_FALSE(doc["observations"].contains("vision"));

  e = expect_error(s.handle(make(0, MsgType::Step, walk_step(1, 0))));
  EXPECT_EQ(e.code, static_cast<std::uint16_t>(ErrorCode::NotReset));
  EXPECT_EQ(e.message, "not reset");

  e = expect_error(s.handle(make(2, MsgType::Hello)));
  EXPECT_EQ(e.code, kBadEnvId);
  e = expect_error(s.handle({0, 77, {}}));
  EXPECT_EQ(e.code, kUnknownMessage);
  e = expect_error(s.handle(make(0, MsgType::Hello, text_payload(R"({"colour": 1})"))));
  EXPECT_EQ(e.code, static_cast<std::uint16_t>(ErrorCode::Configuration));
  EXPECT_FALSE(s.closed());
  EXPECT_FALSE(s.handle(make(0, MsgType::Close)));
  EXPECT_TRUE(s.closed());
}

TEST(Session, MalformedActionNamesAgent) {
  Session s(small_options());
  s.handle(make(0, MsgType::Hello));
  s.handle(make(0, MsgType::Reset, encode_reset(1)));
  const std::vector<Action> bad{Action{ActionKind::Walk, {1.0f}}};
  const auto e = expect_error(s.handle(make(0, MsgType::Step, encode_actions(bad))));
  EXPECT_EQ(e.code, static_cast<std::uint16_t>(ErrorCode::InvalidAction));
  EXPECT_NE(e.message.find("agent 0"), std::string::npos) << e.message;
  const auto garbage = expect_error(s.handle(make(0, MsgType::Step, {1, 2, 3})));
  EXPECT_EQ(garbage.code, static_cast<std::uint16_t>(ErrorCode::Protocol));
  const auto ok = s.handle(make(0, MsgType::Step, walk_step(1, 0)));
  EXPECT_EQ(ok->type, static_cast<std::uint8_t>(MsgType::StepResult));
}

TEST(Session, EnvironmentsAreIsolated) {
  Session s(small_options());
  for (std::uint16_t id : {0, 1}) {
    s.handle(make(id, MsgType::Hello));
    s.handle(make(id, MsgType::Reset, encode_reset(5)));
  }
  const Vec3 before = s.env(1)->world().body(s.env(1)->agents()[0].root_body()).position;
  for (int i = 0; i < 5; ++i) s.handle(make(0, MsgType::Step, walk_step(2, 1)));
  EXPECT_EQ(s.env(0)->steps(), 5);
  EXPECT_EQ(s.env(1)->steps(), 0);
  EXPECT_EQ(s.env(1)->world().body(s.env(1)->agents()[0].root_body()).position, before);
}

TEST(Session, DoneEpisodeRejectsStep) {
  ServerOptions o = small_options();
  o.defaults["max_steps"] = 2;
  Session s(o);
  s.handle(make(0, MsgType::Hello));
  s.handle(make(0, MsgType::Reset, encode_reset(1)));
  s.handle(make(0, MsgType::Step, walk_step(0, 0)));
  const auto last = decode_step_result(s.handle(make(0, MsgType::Step, walk_step(0, 0)))->payload);
  EXPECT_TRUE(last.done);
  const auto e = expect_error(s.handle(make(0, MsgType::Step, walk_step(0, 0))));
  EXPECT_EQ(e.code, static_cast<std::uint16_t>(ErrorCode::EpisodeFinished));
  const auto again = s.handle(make(0, MsgType::Reset));
  EXPECT_EQ(again->type, static_cast<std::uint8_t>(MsgType::StepResult));
}

TEST(Session, ResetMatchesDirectEnvironment) {
  Session s(small_options());
  s.handle(make(0, MsgType::Hello));
  const auto r = decode_step_result(s.handle(make(0, MsgType::Reset, encode_reset(9)))->payload);
  EnvConfig c = env_config_from_json(small_options().defaults);
  Environment env(c);
  const auto direct = env.reset(9);
  EXPECT_EQ(r.observations, direct);
}

TEST(Tcp, RequestResponseAndTranscript) {
  const auto dir = std::filesystem::temp_directory_path() / "embsim_transcripts";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  ServerOptions o = small_options();
  o.transcript_dir = dir;
  Server server(o);
  server.bind("127.0.0.1", 0);
  server.start();
  {
    Client c("127.0.0.1", server.port());
    EXPECT_EQ(c.request(make(0, MsgType::Hello)).type, static_cast<std::uint8_t>(MsgType::HelloAck));
    EXPECT_EQ(c.request(make(0, MsgType::Reset, encode_reset(3))).type,
              static_cast<std::uint8_t>(MsgType::StepResult));
    const auto r = decode_step_result(c.request(make(0, MsgType::Step, walk_step(1, 0))).payload);
    ASSERT_EQ(r.rewards.size(), 1u);
    EXPECT_EQ(json::parse(r.info)["step"], 1);
    c.send(make(0, MsgType::Close));
  }
  server.stop();
  EXPECT_GT(std::filesystem::file_size(dir / "conn_0.bin"), 0u);
}

TEST(Tcp, SlowWriterGetsFullResponse) {
  Server server(small_options());
  server.bind("127.0.0.1", 0);
  server.start();
  Client c("127.0.0.1", server.port());
  const auto hello = encode_frame(make(1, MsgType::Hello));
  for (std::size_t i = 0; i < hello.size(); ++i) {
    c.send_raw(std::span(hello.data() + i, 1));
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  EXPECT_EQ(c.receive().type, static_cast<std::uint8_t>(MsgType::HelloAck));
  server.stop();
}

TEST(Tcp, IndependentServersGiveIdenticalStreams) {
  auto run = [](Server& server) {
    Client c("127.0.0.1", server.port());
    std::vector<std::uint8_t> stream;
    auto log = [&](const Frame& f) {
      const auto b = encode_frame(f);
      stream.insert(stream.end(), b.begin(), b.end());
    };
    log(c.request(make(0, MsgType::Hello)));
    log(c.request(make(0, MsgType::Reset, encode_reset(77))));
    for (int i = 0; i < 10; ++i) log(c.request(make(0, MsgType::Step, walk_step(1.0f, 0.3f * i))));
    return stream;
  };
  Server a(small_options()), b(small_options());
  a.bind("127.0.0.1", 0);
  b.bind("127.0.0.1", 0);
  EXPECT_NE(a.port(), b.port());
  a.start();
  b.start();
  EXPECT_EQ(run(a), run(b));
  a.stop();
  b.stop();
}

TEST(Tcp, ConnectFailureIsIo) {
  Server s(small_options());
  s.bind("127.0.0.1", 0);
  const auto port = s.port();
  s.stop();
  try {
    Client c("127.0.0.1", port);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}
