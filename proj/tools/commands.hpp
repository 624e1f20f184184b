// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace dasm::cli {

/// Each command takes the arguments after the subcommand name and returns a
/// process exit code; errors propagate as exceptions.
int cmd_gen(const std::vector<std::string>& args);
int cmd_train(const std::vector<std::string>& args);
int cmd_infer(const std::vector<std::string>& args);
int cmd_eval(const std::vector<std::string>& args);
int cmd_query_sweep(const std::vector<std::string>& args);
int cmd_selftest(const std::vector<std::string>& args);

}  // namespace dasm::cli
