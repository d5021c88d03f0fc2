// Sketches a 10^7-photon stream through the CLI and checks the sketching process's peak resident
// set stays well below the size of the stream file.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <fcntl.h>
#include <spawn.h>
#include <sys/resource.h>
#include <sys/wait.h>

#include "sketchlidar/io.hpp"

extern char** environ;

namespace fs = std::filesystem;

namespace {

// Runs the CLI with `args`; returns its exit status and peak RSS in MiB.
std::pair<int, double> run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), SKETCHLIDAR_CLI);
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, 1, "/dev/null", O_WRONLY, 0);
  pid_t pid = 0;
  if (posix_spawn(&pid, argv[0], &actions, nullptr, argv.data(), environ) != 0) return {-1, 0};
  posix_spawn_file_actions_destroy(&actions);
  int status = 0;
  rusage usage{};
  wait4(pid, &status, 0, &usage);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, double(usage.ru_maxrss) / 1024};
}

}  // namespace

int main() {
  const fs::path dir = fs::temp_directory_path() / ("sketchlidar_memory_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string stream = (dir / "big.skl").string(), out = (dir / "big.skz").string();
  const auto [made, _] = run_cli({"--seed", "3", "simulate", "--format", "stream", "--n_bar", "10000000", "--count_mode",
                                  "fixed", "--T", "1000", "-o", stream});
  const double file_mib = made == 0 ? double(fs::file_size(stream)) / (1 << 20) : 0;
  const auto [code, peak_mib] = run_cli({"sketch", stream, "--m", "20", "-o", out});
  const auto n = code == 0 ? sketchlidar::read_sketch(out).n : 0;
  fs::remove_all(dir);
  const bool ok = made == 0 && code == 0 && n == 10'000'000 && peak_mib < 0.5 * file_mib;
  std::printf("%s: sketched %llu photons from a %.1f MiB stream with peak RSS %.1f MiB (limit %.1f MiB)\n",
              ok ? "PASS" : "FAIL", static_cast<unsigned long long>(n), file_mib, peak_mib, 0.5 * file_mib);
  return ok ? 0 : 1;
}
