// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRAM Authors

#include <string>
#include <vector>

#include "mram/cli.hpp"

int main(int argc, char** argv) {
  return mram::cli::run(std::vector<std::string>(argv, argv + argc));
}
