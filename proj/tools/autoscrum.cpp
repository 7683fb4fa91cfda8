// SPDX-License-Identifier: Apache-2.0
#include <autoscrum/cli.hpp>
#include <autoscrum_assets.hpp>

#include <unistd.h>

int main(int argc, char** argv)
{
    autoscrum::CliEnvironment env {std::cin, std::cout, std::cerr, ::isatty(STDIN_FILENO) == 1, autoscrum_assets()};
    return autoscrum::run_cli(argc, argv, env);
}
