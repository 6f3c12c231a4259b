// SPDX-License-Identifier: Apache-2.0
#include "irnn/cli.hpp"

int main(int argc, char** argv) { return irnn::cli::run(argc, argv); }
