// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include <boost/program_options/errors.hpp>
#include <cstdio>
#include <exception>
#include <map>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "dasm/core/errors.hpp"

namespace {

constexpr const char* kUsage =
    "usage: dasm <command> [options]\n"
    "\n"
    "commands:\n"
    "  gen          generate a synthetic strongly-labelled dataset\n"
    "  train        train a model (--partial or --full, optional --ablation)\n"
    "  infer        run detection on a directory of WAV files\n"
    "  eval         score detections against reference labels (PSDS)\n"
    "  query-sweep  PSDS on novel classes as the audio-query duration shrinks\n"
    "  selftest     run the built-in invariant checks\n"
    "\n"
    "Run 'dasm <command> --help' for the options of a command.\n";

}  // namespace

int main(int argc, char** argv) {
  using Command = int (*)(const std::vector<std::string>&);
  const std::map<std::string, Command> commands{
      {"gen", dasm::cli::cmd_gen},         {"train", dasm::cli::cmd_train},
      {"infer", dasm::cli::cmd_infer},     {"eval", dasm::cli::cmd_eval},
      {"query-sweep", dasm::cli::cmd_query_sweep}, {"selftest", dasm::cli::cmd_selftest},
  };
  if (argc < 2 || std::string(argv[1]) == "--help" || std::string(argv[1]) == "-h") {
    std::fputs(kUsage, argc < 2 ? stderr : stdout);
    return argc < 2 ? 2 : 0;
  }
  auto it = commands.find(argv[1]);
  if (it == commands.end()) {
    std::fprintf(stderr, "dasm: unknown command '%s'\n\n%s", argv[1], kUsage);
    return 2;
  }
  try {
    return it->second(std::vector<std::string>(argv + 2, argv + argc));
  } catch (const dasm::ValidationError& e) {
    std::fprintf(stderr, "dasm %s: validation error: %s\n", argv[1], e.what());
    return 2;
  } catch (const dasm::ConfigError& e) {
    std::fprintf(stderr, "dasm %s: configuration error: %s\n", argv[1], e.what());
    return 2;
  } catch (const boost::program_options::error& e) {
    std::fprintf(stderr, "dasm %s: %s\n", argv[1], e.what());
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "dasm %s: malformed JSON: %s\n", argv[1], e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dasm %s: error: %s\n", argv[1], e.what());
    return 1;
  }
}
