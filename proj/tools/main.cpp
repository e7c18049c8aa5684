// SPDX-License-Identifier: Apache-2.0
#include "metarl/cli.hpp"

int main(int argc, char** argv) { return metarl::run_cli(argc, argv); }
