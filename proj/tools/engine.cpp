// engine: environment server and dataset generator.

#include "embsim/dataset/dataset.hpp"
#include "embsim/env/scene.hpp"
#include "embsim/error.hpp"
#include "embsim/net/server.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <thread>

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void setup_logging() {
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("ENGINE_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only accept real names.
    if (level != spdlog::level::off || std::string(env) == "off") {
      spdlog::set_level(level);
    } else {
      spdlog::warn("ignoring ENGINE_LOG={}", env);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Embodied agent simulation engine"};
  app.require_subcommand(1);

  auto* serve = app.add_subcommand("serve", "Serve environments over TCP");
  std::string host = "127.0.0.1";
  std::uint16_t port = 5555;
  std::string task = "kick_the_ball";
  std::string scene = "SimpleEnv";
  int agents = 1;
  std::string obs = "vision,audio,tactile,proprio";
  std::string audio_mode = "hrtf";
  std::string hrtf_file;
  std::uint64_t seed = 0;
  int max_envs = 8;
  std::string transcripts;
  serve->add_option("--host", host, "Address to bind")->capture_default_str();
  serve->add_option("--port", port, "TCP port (0 picks a free one)")->capture_default_str();
  serve->add_option("--task", task, "kick_the_ball, object_nav, grab_object, multi_agent_nav")
      ->capture_default_str();
  serve->add_option("--scene", scene, "Playground name or scene JSON file")->capture_default_str();
  serve->add_option("--agents", agents, "Agents per environment")->capture_default_str();
  serve->add_option("--obs", obs, "Comma-separated sensors")->capture_default_str();
  serve->add_option("--audio-mode", audio_mode, "mono, stereo or hrtf")
      ->check(CLI::IsMember({"mono", "stereo", "hrtf"}))
      ->capture_default_str();
  serve->add_option("--hrtf-file", hrtf_file, "VHRT filter table")->check(CLI::ExistingFile);
  serve->add_option("--seed", seed, "Default reset seed")->capture_default_str();
  serve->add_option("--max-envs", max_envs, "Environments per connection")
      ->check(CLI::Range(1, 65535))
      ->capture_default_str();
  serve->add_option("--transcript-dir", transcripts, "Record each connection's frames here");

  auto* gen = app.add_subcommand("gen", "Generate a supervised dataset");
  std::string kind;
  int n = 1000;
  std::uint64_t gen_seed = 0;
  std::string out;
  std::string gen_audio = "hrtf";
  std::string gen_hrtf;
  gen->add_option("kind", kind, "image, bbox, distance, sound or tactile")
      ->required()
      ->check(CLI::IsMember(embsim::dataset::kind_names()));
  gen->add_option("--n", n, "Sample count")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--seed", gen_seed, "Seed")->capture_default_str();
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--audio-mode", gen_audio, "mono, stereo or hrtf (sound kind)")
      ->check(CLI::IsMember({"mono", "stereo", "hrtf"}))
      ->capture_default_str();
  gen->add_option("--hrtf-file", gen_hrtf, "VHRT filter table (sound kind)")
      ->check(CLI::ExistingFile);

  auto* check = app.add_subcommand("validate", "Check a generated dataset against its manifest");
  std::string dir;
  check->add_option("dir", dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) {
      nlohmann::json defaults{{"task", task}, {"agents", agents}, {"obs", obs},
                              {"audio_mode", audio_mode}};
      const auto names = embsim::playground_names();
      if (std::find(names.begin(), names.end(), scene) != names.end()) {
        defaults["playground"] = scene;
      } else {
        defaults["scene_file"] = scene;
      }
      if (!hrtf_file.empty()) defaults["hrtf_file"] = hrtf_file;
      // Fail at startup on a bad configuration rather than at the first HELLO.
      embsim::Environment probe(embsim::env_config_from_json(defaults));

      embsim::net::ServerOptions options;
      options.defaults = defaults;
      options.seed = seed;
      options.max_envs = max_envs;
      if (!transcripts.empty()) {
        std::filesystem::create_directories(transcripts);
        options.transcript_dir = transcripts;
      }
      embsim::net::Server server(options);
      server.bind(host, port);
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.start();
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      spdlog::info("shutting down");
      server.stop();
      return 0;
    }
    if (*gen) {
      embsim::dataset::GenOptions o;
      o.kind = embsim::dataset::kind_from_string(kind);
      o.n = n;
      o.seed = gen_seed;
      o.out = out;
      o.audio_mode = embsim::audio_mode_from_string(gen_audio);
      if (!gen_hrtf.empty()) o.hrtf_file = gen_hrtf;
      const auto t0 = std::chrono::steady_clock::now();
      embsim::dataset::generate(o);
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      spdlog::info("wrote {} {} samples to {} in {:.1f} s", n, kind, out, secs);
      return 0;
    }
    if (*check) {
      const int count = embsim::dataset::validate_dataset(dir);
      spdlog::info("{}: {} samples ok", dir, count);
      return 0;
    }
  } catch (const embsim::Error& e) {
    spdlog::error("{} ({})", e.what(), embsim::to_string(e.code()));
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
